#pragma once

// Experiment runner: Monte Carlo rejection tables, deterministic fiber
// traces, and batch volume analysis.

#include <cstdint>
#include <string>
#include <vector>

#include "qhardi/io.hpp"
#include "qhardi/phantom.hpp"
#include "qhardi/stats.hpp"

namespace qhardi {

struct ExperimentConfig {
    std::vector<ModelId> models{ModelId::A1, ModelId::A2, ModelId::A3,
                                ModelId::A4, ModelId::A5, ModelId::A6};
    std::vector<double> noise_levels{1.0 / 30.0}; // channel sigma in units of A(0)
    int scheme_n = 60;
    std::string scheme_path; // overrides scheme_n when set
    int replicates = 200;
    TestParams params;
    std::uint64_t seed = 1;
    int workers = 0; // 0 = default_workers()
};

AcquisitionScheme resolve_scheme(const ExperimentConfig& config);

/// Rejection counts for one (model, noise, statistic) cell. The sequential
/// protocol conditions V, K and Utilde on U rejecting and Q on U failing;
/// unconditional counts over all replicates are kept alongside.
struct Table3Cell {
    ModelId model;
    double sigma;
    StatTag stat;
    int rejected = 0;
    int denominator = 0;
    int rejected_all = 0;
    int total = 0;
    double threshold = 0.0;
};

struct Table3Result {
    std::vector<Table3Cell> cells;
    std::string csv() const;
    std::string pretty() const;
    const Table3Cell& cell(ModelId model, double sigma, StatTag stat) const;
};

/// Calibrations for every statistic the table needs, keyed by (stat,
/// sigma, scheme size). Throws with a pointer at the calibrate command when
/// an entry is missing.
struct CalibrationStore {
    std::vector<NullCalibration> entries;

    CalibrationSet set_for(double sigma, int scheme_n) const;
    bool complete_for(double sigma, int scheme_n) const;
};

/// Calibrate every statistic needed by the config (one entry per noise
/// level) with `reps` replicates each.
CalibrationStore calibrate_for(const ExperimentConfig& config, int reps);

Table3Result run_table3(const ExperimentConfig& config, const CalibrationStore& store);

/// One replicate end to end; exposed for calibration-free diagnostics.
TestReport replicate_report(const DiffusionModel& model, const AcquisitionScheme& scheme,
                            double sigma, std::uint64_t seed, const TestParams& params,
                            const CalibrationSet& calibs,
                            std::shared_ptr<const SphericalTriangulation> tri = nullptr);

// --- fiber traces -----------------------------------------------------------

struct TraceRow {
    std::string voxel; // "a".."g"
    SummarySet summary;
};

/// Noiseless voxel-sequence summaries: the evolution model is sampled
/// densely (icosphere acquisition, sigma = 0) and run through the standard
/// estimation pipeline, so only discretization error remains. Forking has
/// seven voxels, crossing six.
std::vector<TraceRow> run_fiber_trace(FiberKind kind, const TestParams& params,
                                      int dense_level = 4, int workers = 0);

std::string trace_csv(const std::vector<TraceRow>& rows);

// --- volume analysis --------------------------------------------------------

struct VoxelRecord {
    size_t index = 0;
    int x = 0, y = 0, z = 0;
    TestReport report;
};

struct AnalyzeResult {
    std::vector<VoxelRecord> voxels; // masked-in voxels in index order
};

/// Per-voxel reports over the masked volume, written as stats.csv plus one
/// flat float32 map per statistic/p-value and a classification byte map.
/// Work is chunked; completed chunk files under <out_dir>/chunks are reused
/// on resume and the merged outputs are identical to a single-pass run.
AnalyzeResult analyze_volume(const VolumeDataset& dataset, const TestParams& params,
                             const CalibrationStore& store, const std::string& out_dir,
                             int workers = 0);

/// Synthetic volume: voxels in region 0 (x < nx/2) use model0, the rest
/// model1; equal models give a homogeneous volume.
VolumeDataset synthesize_volume(int nx, int ny, int nz, ModelId model0, ModelId model1,
                                double sigma, const AcquisitionScheme& scheme,
                                std::uint64_t seed);

std::uint64_t config_hash(const ExperimentConfig& config);

} // namespace qhardi
