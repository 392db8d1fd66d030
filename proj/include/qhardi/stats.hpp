#pragma once

// Scalar summaries and hypothesis tests on a filled circle grid, Monte
// Carlo calibration of null distributions, and the voxel classification
// tree.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qhardi/estimator.hpp"
#include "qhardi/geometry.hpp"
#include "qhardi/phantom.hpp"

namespace qhardi {

enum class Decision { Reject, Fail, Undefined };

/// Nonparametric scalar summaries of one voxel. kappa follows the windowed
/// discrete form used by the asymmetry test. Undefined entries (logs of
/// vanishing values) are NaN with low_snr set.
struct SummarySet {
    double tau = 0.0;
    double tau_tilde = 0.0;
    double xi = 1.0;
    double zeta = 1.0;
    double kappa = 0.0;
    double gfa = 0.0;
    bool low_snr = false;
};

/// Summaries from a filled grid; frt_values (the coarse candidate FRT
/// samples) feed the generalized fractional anisotropy and may be empty.
SummarySet summaries(const CircleGrid& grid, std::span<const double> frt_values = {});

/// Apparent diffusion coefficient -log(value)/b.
double adc(double value, double b);

struct UResult {
    double T = 0.0, U = 0.0;
    Decision decision = Decision::Fail;
    bool sigma_zero = false; // noiseless constant circle; decided on T alone
};

/// Non-preference vs anisotropy. T compares the dynamic range of the
/// average perpendicular diffusion with the dynamic range on the dominant
/// circle; U = T * abar_N / sigma_A, rejected above the threshold
/// (published defaults 0.1185, conservative 1.9637).
UResult test_U(const CircleGrid& grid, double abar_N, double sigma_A,
               double threshold = 0.1185);

struct UtildeResult {
    double T_tilde = 0.0, U_tilde = 0.0;
    Decision decision = Decision::Fail;
};

/// Multi-modal vs unimodal at the boundary ratio c (default 2): rejection
/// favors a unimodal diffusion. a_min is the grid value at the pole u1.
UtildeResult test_U_tilde(const CircleGrid& grid, double sigma_A, double c, double threshold);

struct QResult {
    double X = 1.0, Q = 0.0;
    std::vector<double> X_k;
    Decision decision = Decision::Fail;
};

/// Isotropic vs multi-modal among voxels without detected anisotropy.
/// X < 1 signals structure, so rejection is in the lower tail.
QResult test_Q(const CircleGrid& grid, double sigma2, double rho, double threshold_lower);

struct VResult {
    int k_max = 0;
    double Z = 1.0, V = 0.0;
    Decision decision = Decision::Fail;
};

/// Circular vs ellipsoidal decay on the dominant circle. The evaluation
/// point sits N/(2 m') grid steps past the arg-max for robustness; the
/// degrees-of-freedom pair must satisfy m < m' < 2m.
VResult test_V(const CircleGrid& grid, double sigma2, int m, int m_prime, double threshold);

struct KResult {
    std::vector<double> P_k;
    int k_breve_max = 0;
    double K = 0.0;
    double K_standardized = 0.0;
    Decision decision = Decision::Fail;
};

/// Symmetric vs asymmetric decay across the dominant circle; two-sided
/// Gaussian decision on K standardized by its calibrated null mean/sd.
KResult test_K(const CircleGrid& grid, double null_mean, double null_sd, double level = 0.10);

// --- Monte Carlo calibration -------------------------------------------

enum class StatTag { U, Utilde, Q, V, K };

std::string stat_name(StatTag tag);
StatTag stat_from_name(const std::string& name);

/// Everything that pins a null distribution: the statistic, its null model
/// family, and the acquisition/analysis parameters.
struct NullSpec {
    StatTag stat = StatTag::U;
    AcquisitionScheme scheme;
    double sigma = 0.0;  // channel noise in units of A(0)
    int grid_n = 128;
    double rho = 3.0;
    double c = 2.0;
    int m = 9, m_prime = 16; // N/(2m') = 4 at N = 128; strict m < m' < 2m holds
    int frt_L = 48;
    MadKind mad = MadKind::MaxAbs;

    std::uint64_t hash() const;
};

struct NullCalibration {
    StatTag stat = StatTag::U;
    std::uint64_t spec_hash = 0;
    double sigma = 0.0;
    int scheme_n = 0;
    int reps = 0;
    std::uint64_t seed = 0;
    double mean = 0.0, sd = 0.0;
    std::map<double, double> quantiles; // level -> empirical quantile

    double quantile(double level) const;
    /// Decision threshold at the statistic's conventional level and tail.
    double threshold(double level = 0.0) const;
    /// Upper-tail (U, Utilde, V), lower-tail (Q) or two-sided Gaussian (K)
    /// p-value of an observed statistic.
    double p_value(double observed) const;
};

/// Simulate the statistic under its null model (isotropic for U and Q, a
/// boundary prolate tensor for Utilde, the prolate reference for V and K)
/// at the given noise level and scheme. Deterministic given the seed;
/// replicates run on index-keyed substreams.
NullCalibration calibrate_null(const NullSpec& spec, int reps, std::uint64_t seed,
                               int workers = 1);

/// Null model used by calibrate_null (exposed for tests).
DiffusionModel null_model_for(StatTag stat, double c, const Mat3& rotation);

// --- Per-voxel report and classification --------------------------------

enum class VoxelClass : std::uint8_t {
    Isotropic = 0,
    UnimodalProlate = 1,
    UnimodalScalene = 2,
    UnimodalAsymmetric = 3,
    Multimodal = 4,
    Undetermined = 5,
};

std::string voxel_class_name(VoxelClass c);

struct TestReport {
    double T = 0, U = 0, T_tilde = 0, U_tilde = 0, X = 1, Q = 0, Z = 1, V = 0, K = 0;
    std::vector<double> X_k;
    std::vector<double> P_k;
    int k_max = 0, k_breve_max = 0;
    double abar_N = 0, sigma_A = 0, sigma_star = 0, sigma2 = 0;
    std::map<std::string, double> thresholds;
    std::map<std::string, double> p_values;
    std::map<std::string, Decision> decisions;
    VoxelClass classification = VoxelClass::Undetermined;
    SummarySet summary;
};

struct TestParams {
    int grid_n = 128;
    double rho = 3.0;
    double c = 2.0;
    int m = 9, m_prime = 16; // N/(2m') = 4 at N = 128; strict m < m' < 2m holds
    double u_threshold = 0.1185; // published 5% default; 1.9637 conservative
    int frt_L = 48;
    MadKind mad = MadKind::MaxAbs;
    double k_level = 0.10;
};

struct CalibrationSet {
    std::optional<NullCalibration> u, u_tilde, q, v, k;

    const NullCalibration* get(StatTag tag) const;
    void put(NullCalibration cal);
};

/// All five tests on one voxel's filled grid, with thresholds from the
/// calibration set (U uses the published default unless params override).
TestReport run_all_tests(const CircleGrid& grid, double sigma_star, const CalibrationSet& calibs,
                         const TestParams& params, std::span<const double> frt_values = {});

/// Decision tree over the per-test outcomes:
///   U fail,  Q fail          -> isotropic
///   U fail,  Q reject        -> multimodal
///   U reject, Utilde fail    -> multimodal
///   U reject, Utilde reject  -> unimodal (asymmetric if K rejects, else
///                               scalene if V rejects, else prolate)
/// Undefined inputs on the needed path -> undetermined.
VoxelClass classify_voxel(const TestReport& report);

} // namespace qhardi
