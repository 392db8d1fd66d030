#pragma once

// From a raw acquisition to a filled circle grid: normalization, Hermitian
// augmentation, spherical interpolation, the Funk-Radon transform, dominant
// direction and minor axis estimation, and noise-scale estimators.

#include <memory>
#include <optional>
#include <vector>

#include "qhardi/geometry.hpp"
#include "qhardi/interpolate.hpp"
#include "qhardi/phantom.hpp"

namespace qhardi {

/// Normalized, antipodally augmented measurements plus the interpolation
/// structure built over them. Triangulations depend only on the direction
/// set, so one can be shared across replicates of a fixed scheme.
struct NormalizedDiffusion {
    std::vector<Direction> points; // 2n augmented directions
    std::vector<double> values;    // A(q) per point, A(-q) = A(q) exactly
    double abar0 = 0.0;            // mean b=0 magnitude
    double sigma_star = 0.0;       // per-measurement noise scale estimate
    bool sigma_star_fallback = false;
    std::shared_ptr<const SphericalTriangulation> triangulation;
};

std::shared_ptr<const SphericalTriangulation>
build_scheme_triangulation(const AcquisitionScheme& scheme);

/// Normalize by the mean b=0 value and reflect to the augmented set. Pass a
/// previously built triangulation to skip the rebuild on repeated schemes.
NormalizedDiffusion normalize(const HardiSample& sample,
                              std::shared_ptr<const SphericalTriangulation> shared = nullptr);

/// Locally linear interpolation on the sphere; exact at sample points and
/// antipodally symmetric by construction.
double interpolate(const NormalizedDiffusion& nd, const Direction& q);

/// Funk-Radon transform: mean of the interpolated diffusion over L equally
/// spaced points on the great circle perpendicular to x. frt(x) == frt(-x)
/// bitwise. L must be at least 16.
double frt(const NormalizedDiffusion& nd, const Direction& x, int L = 64);

struct DominantEstimate {
    Frame frame;              // u1 = argmax direction, u2/u3 minor axes
    std::vector<double> frt_values; // FRT over the coarse candidate set
    int candidate_count = 0;  // total candidates examined across stages
};

struct DominantOptions {
    int frt_L = 48;
    bool refine = true;       // icosphere neighborhood + local polish stages
    int circle_samples = 512; // u2 selection resolution on the dominant circle
};

/// Arg-max of the FRT over the augmented sample directions, refined on a
/// 2562-vertex icosphere neighborhood and a local tangent grid. u2 is the
/// direction of largest interpolated value on the dominant circle (the
/// decay-maximizing axis), u3 = u1 x u2.
DominantEstimate dominant_direction(const NormalizedDiffusion& nd,
                                    const DominantOptions& opts = {});

/// Interpolate the normalized diffusion onto the discretization grid.
CircleGrid fill_grid(const NormalizedDiffusion& nd, const DominantEstimate& est, int n);

enum class MadKind { MaxAbs, MedianAbs };

/// Mean level and noise scale on the dominant circle:
/// sigma_A = sqrt(rho) * MAD{values - mean}, MAD read as the maximum
/// absolute deviation (MedianAbs available as the conventional variant).
std::pair<double, double> estimate_sigma_circle(const CircleGrid& grid, double rho = 3.0,
                                                MadKind kind = MadKind::MaxAbs);

struct SigmaStarEstimate {
    double value = 0.0;
    bool fallback = false; // true when derived from nearest-neighbor residuals
};

/// Per-measurement noise scale: spread of the b=0 replicates when n0 >= 2,
/// else the simulator sigma when known, else a flagged high-frequency
/// residual estimate.
SigmaStarEstimate estimate_sigma_star(const HardiSample& sample);

/// Grid filled directly from a model (no sampling or interpolation); the
/// reference path for noiseless closed-form checks.
CircleGrid grid_from_model(const DiffusionModel& model, const Frame& frame, int n,
                           double normalizer = 0.0);

} // namespace qhardi
