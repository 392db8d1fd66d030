#pragma once

// Closed-form noiseless diffusion models, multi-voxel fiber evolutions and
// the Rician acquisition simulator.

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "qhardi/geometry.hpp"

namespace qhardi {

enum class Kernel {
    Gaussian,    // B(q) = exp(-2 (pi q)^2)
    RawExponent, // A(q) = exp(-t q^T D q)
};

/// A(q) = B(sqrt(sum_j lambda_j (u_j . q)^2)). With Kernel::RawExponent the
/// decay is exp(-t * quadratic form), the parameterization used by the six
/// reference models (t = 0.04, integer eigenvalues).
struct EllipsoidModel {
    std::array<double, 3> lambdas{};
    Frame frame = Frame::canonical();
    Kernel kernel = Kernel::RawExponent;
    double t = 0.04;
};

struct MixtureModel {
    std::vector<std::pair<double, EllipsoidModel>> components; // weights sum to 1
};

/// Model five: magnitude of a Hermitian transform with asymmetric decay
/// along frame.u3, expressed through the Dawson function.
struct AsymmetricModel {
    double t = 0.04;
    Frame frame = Frame::canonical();
};

using DiffusionModel = std::variant<EllipsoidModel, MixtureModel, AsymmetricModel>;

/// Evaluate a model at a q-space point (unit vector in normal use; q = 0
/// yields the normalizer A(0)).
double eval_model(const DiffusionModel& model, const Vec3& q);
double eval_model(const EllipsoidModel& model, const Vec3& q);
double eval_model(const MixtureModel& model, const Vec3& q);
double eval_model(const AsymmetricModel& model, const Vec3& q);

/// Dawson integral D(x) = exp(-x^2) Int_0^x exp(t^2) dt. Odd; |error| below
/// 1e-12 over the real line (series for small |x|, Rybicki sampling beyond).
double dawson(double x);

/// The six reference models. A1 prolate, A2 scalene, A3 isotropic, A4
/// equal-weight 90-degree crossing, A5 asymmetric (Dawson form), A6
/// unequal-weight two-tensor mixture. `rotation` re-orients models A1-A5;
/// A6 ignores it and keeps its second tensor on a fixed oblique basis.
enum class ModelId { A1, A2, A3, A4, A5, A6 };

DiffusionModel make_paper_model(ModelId id, const Mat3& rotation);
std::string model_name(ModelId id);
ModelId model_from_name(const std::string& name);

enum class FiberKind { Forking, Crossing };

/// Two-tensor evolution through a voxel sequence, parameterized by
/// t in [0, 1]. Forking: weight a1 = 1 - t/2, second direction swings from
/// 0 to 90 degrees. Crossing: directions fixed at 90 degrees, weight runs
/// 1 -> 0.75 -> 0.5 -> 0.75 -> 1 over the sequence. Component eigenvalues
/// default to the prolate reference tensor and are configurable.
MixtureModel fiber_evolution(FiberKind kind, double t,
                             const std::array<double, 3>& eigenvalues = {68.0, 8.0, 8.0});

struct AcquisitionScheme {
    std::vector<Direction> directions;
    int n0 = 1;
    double b_value = 1600.0; // s/mm^2, carried as metadata only

    int n() const { return static_cast<int>(directions.size()); }
};

struct HardiSample {
    std::vector<double> raw_values; // magnitudes at scheme directions
    std::vector<double> b0_values;  // n0 magnitudes at q = 0
    AcquisitionScheme scheme;
    double noise_sigma = -1.0; // simulator sigma in units of A(0); < 0 when unknown
};

/// Simulate one acquisition. noise_sigma is the channel standard deviation
/// expressed in units of A(0); both quadrature channels receive independent
/// Gaussian noise and the magnitude is stored. Deterministic given
/// (seed, scheme).
HardiSample acquire(const DiffusionModel& model, const AcquisitionScheme& scheme,
                    double noise_sigma, std::uint64_t seed);

/// Noisy complex channels for one measurement; acquire() is built on this.
std::array<double, 2> noisy_channels(double amplitude, double sigma_abs, std::mt19937_64& rng);

/// n directions spread by minimizing antipodal-pair electrostatic energy
/// from a deterministic start. Includes n0 = 1 b=0 acquisitions by default.
AcquisitionScheme electrostatic_scheme(int n, int n0 = 1);

/// Smallest angle between any two acquisition axes, antipody folded out.
double min_antipodal_angle(const AcquisitionScheme& scheme);

/// Dense scheme for noiseless reference runs: icosphere vertices with one
/// direction kept per antipodal pair (level 4 keeps 1281 of 2562).
AcquisitionScheme dense_scheme(int level = 4);

// Seed derivation and rotation sampling used by every stochastic component;
// substreams are keyed by index so parallel schedules cannot change results.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);
Mat3 uniform_rotation(std::mt19937_64& rng);

} // namespace qhardi
