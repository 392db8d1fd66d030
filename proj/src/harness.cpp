#include "qhardi/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "qhardi/estimator.hpp"
#include "qhardi/parallel.hpp"

namespace qhardi {

namespace fs = std::filesystem;

AcquisitionScheme resolve_scheme(const ExperimentConfig& config) {
    if (!config.scheme_path.empty()) return read_scheme(config.scheme_path);
    return electrostatic_scheme(config.scheme_n);
}

CalibrationSet CalibrationStore::set_for(double sigma, int scheme_n) const {
    CalibrationSet set;
    for (StatTag tag : {StatTag::U, StatTag::Utilde, StatTag::Q, StatTag::V, StatTag::K}) {
        if (auto cal = find_calibration(entries, tag, sigma, scheme_n)) set.put(*cal);
    }
    return set;
}

bool CalibrationStore::complete_for(double sigma, int scheme_n) const {
    for (StatTag tag : {StatTag::U, StatTag::Utilde, StatTag::Q, StatTag::V, StatTag::K}) {
        if (!find_calibration(entries, tag, sigma, scheme_n)) return false;
    }
    return true;
}

CalibrationStore calibrate_for(const ExperimentConfig& config, int reps) {
    const AcquisitionScheme scheme = resolve_scheme(config);
    const int workers = config.workers > 0 ? config.workers : default_workers();
    CalibrationStore store;
    for (double sigma : config.noise_levels) {
        for (StatTag tag : {StatTag::U, StatTag::Utilde, StatTag::Q, StatTag::V, StatTag::K}) {
            NullSpec spec;
            spec.stat = tag;
            spec.scheme = scheme;
            spec.sigma = sigma;
            spec.grid_n = config.params.grid_n;
            spec.rho = config.params.rho;
            spec.c = config.params.c;
            spec.m = config.params.m;
            spec.m_prime = config.params.m_prime;
            spec.frt_L = config.params.frt_L;
            spec.mad = config.params.mad;
            const std::uint64_t cal_seed =
                derive_seed(config.seed, 0xCA11B000u + static_cast<unsigned>(tag) * 977 +
                                             static_cast<std::uint64_t>(sigma * 1e6));
            store.entries.push_back(calibrate_null(spec, reps, cal_seed, workers));
        }
    }
    return store;
}

TestReport replicate_report(const DiffusionModel& model, const AcquisitionScheme& scheme,
                            double sigma, std::uint64_t seed, const TestParams& params,
                            const CalibrationSet& calibs,
                            std::shared_ptr<const SphericalTriangulation> tri) {
    const HardiSample sample = acquire(model, scheme, sigma, seed);
    const NormalizedDiffusion nd = normalize(sample, std::move(tri));
    DominantOptions opts;
    opts.frt_L = params.frt_L;
    const DominantEstimate est = dominant_direction(nd, opts);
    const CircleGrid grid = fill_grid(nd, est, params.grid_n);
    return run_all_tests(grid, nd.sigma_star, calibs, params, est.frt_values);
}

Table3Result run_table3(const ExperimentConfig& config, const CalibrationStore& store) {
    const AcquisitionScheme scheme = resolve_scheme(config);
    const auto tri = build_scheme_triangulation(scheme);
    const int workers = config.workers > 0 ? config.workers : default_workers();
    if (config.replicates < 1) throw std::invalid_argument("run_table3: replicates must be >= 1");

    Table3Result result;
    int cell_index = 0;
    for (double sigma : config.noise_levels) {
        if (!store.complete_for(sigma, scheme.n())) {
            char buf[160];
            std::snprintf(buf, sizeof buf,
                          "no calibration for sigma=%.6g scheme_n=%d; run "
                          "`qhardi calibrate --noise %.6g` first",
                          sigma, scheme.n(), sigma);
            throw std::runtime_error(buf);
        }
        const CalibrationSet calibs = store.set_for(sigma, scheme.n());
        for (ModelId id : config.models) {
            struct RepFlags {
                bool u = false, ut = false, q = false, v = false, k = false;
            };
            std::vector<RepFlags> flags(config.replicates);
            parallel_for(config.replicates, workers, [&](int rep) {
                const std::uint64_t base =
                    derive_seed(config.seed, (static_cast<std::uint64_t>(cell_index) << 24) +
                                                 static_cast<std::uint64_t>(rep));
                // Fresh rotation per replicate under noise; a single one for
                // zero-noise runs so replicates are identical.
                const std::uint64_t rot_base =
                    sigma > 0.0 ? base
                                : derive_seed(config.seed,
                                              static_cast<std::uint64_t>(cell_index) << 24);
                std::mt19937_64 rot_rng(derive_seed(rot_base, 11));
                const Mat3 rot = uniform_rotation(rot_rng);
                const DiffusionModel model = make_paper_model(id, rot);
                const TestReport rep_out = replicate_report(model, scheme, sigma,
                                                            derive_seed(base, 23),
                                                            config.params, calibs, tri);
                RepFlags f;
                f.u = rep_out.decisions.at("U") == Decision::Reject;
                f.ut = rep_out.decisions.at("Ut") == Decision::Reject;
                f.q = rep_out.decisions.at("Q") == Decision::Reject;
                f.v = rep_out.decisions.at("V") == Decision::Reject;
                f.k = rep_out.decisions.at("K") == Decision::Reject;
                flags[rep] = f;
            });

            int u_rej = 0;
            for (const auto& f : flags) u_rej += f.u;
            auto add = [&](StatTag stat, int rej_cond, int denom, int rej_all) {
                Table3Cell cell;
                cell.model = id;
                cell.sigma = sigma;
                cell.stat = stat;
                cell.rejected = rej_cond;
                cell.denominator = denom;
                cell.rejected_all = rej_all;
                cell.total = config.replicates;
                const auto* cal = calibs.get(stat);
                cell.threshold = stat == StatTag::U ? config.params.u_threshold
                                                    : (cal ? cal->threshold() : 0.0);
                result.cells.push_back(cell);
            };
            int ut_c = 0, ut_a = 0, q_c = 0, q_a = 0, v_c = 0, v_a = 0, k_c = 0, k_a = 0;
            for (const auto& f : flags) {
                ut_a += f.ut;
                q_a += f.q;
                v_a += f.v;
                k_a += f.k;
                if (f.u) {
                    ut_c += f.ut;
                    v_c += f.v;
                    k_c += f.k;
                } else {
                    q_c += f.q;
                }
            }
            add(StatTag::U, u_rej, config.replicates, u_rej);
            add(StatTag::V, v_c, u_rej, v_a);
            add(StatTag::K, k_c, u_rej, k_a);
            add(StatTag::Q, q_c, config.replicates - u_rej, q_a);
            add(StatTag::Utilde, ut_c, u_rej, ut_a);
            ++cell_index;
        }
    }
    return result;
}

const Table3Cell& Table3Result::cell(ModelId model, double sigma, StatTag stat) const {
    for (const auto& c : cells) {
        if (c.model == model && c.stat == stat && std::abs(c.sigma - sigma) < 1e-12) return c;
    }
    throw std::out_of_range("no such table cell");
}

std::string Table3Result::csv() const {
    std::ostringstream out;
    out << "model,sigma,statistic,rejected,denominator,rejected_all,replicates,threshold\n";
    for (const auto& c : cells) {
        out << model_name(c.model) << ',' << format_double(c.sigma) << ',' << stat_name(c.stat)
            << ',' << c.rejected << ',' << c.denominator << ',' << c.rejected_all << ','
            << c.total << ',' << format_double(c.threshold) << '\n';
    }
    return out.str();
}

std::string Table3Result::pretty() const {
    std::ostringstream out;
    std::vector<double> sigmas;
    for (const auto& c : cells) {
        if (std::find(sigmas.begin(), sigmas.end(), c.sigma) == sigmas.end()) {
            sigmas.push_back(c.sigma);
        }
    }
    std::vector<ModelId> models;
    for (const auto& c : cells) {
        if (std::find(models.begin(), models.end(), c.model) == models.end()) {
            models.push_back(c.model);
        }
    }
    for (double s : sigmas) {
        out << "sigma = " << format_double(s) << "\n";
        out << "  stat";
        for (ModelId m : models) out << "\t" << model_name(m);
        out << "\n";
        for (StatTag stat : {StatTag::U, StatTag::V, StatTag::K, StatTag::Q, StatTag::Utilde}) {
            out << "  " << stat_name(stat);
            for (ModelId m : models) {
                bool found = false;
                for (const auto& c : cells) {
                    if (c.model == m && c.stat == stat && std::abs(c.sigma - s) < 1e-12) {
                        if (stat == StatTag::U) out << "\t" << c.rejected;
                        else out << "\t" << c.rejected << "/" << c.denominator;
                        found = true;
                        break;
                    }
                }
                if (!found) out << "\t-";
            }
            out << "\n";
        }
    }
    return out.str();
}

// --- fiber traces -----------------------------------------------------------

std::vector<TraceRow> run_fiber_trace(FiberKind kind, const TestParams& params,
                                      int dense_level, int workers) {
    const AcquisitionScheme scheme = dense_scheme(dense_level);
    const auto tri = build_scheme_triangulation(scheme);
    const int count = kind == FiberKind::Forking ? 7 : 6;
    std::vector<double> ts(count);
    for (int i = 0; i < count; ++i) ts[i] = static_cast<double>(i) / (count - 1);

    std::vector<TraceRow> rows(count);
    parallel_for(count, workers > 0 ? workers : default_workers(), [&](int i) {
        const MixtureModel model = fiber_evolution(kind, ts[i]);
        const HardiSample sample = acquire(model, scheme, 0.0, 0);
        const NormalizedDiffusion nd = normalize(sample, tri);
        DominantOptions opts;
        opts.frt_L = params.frt_L;
        const DominantEstimate est = dominant_direction(nd, opts);
        const CircleGrid grid = fill_grid(nd, est, params.grid_n);
        rows[i].voxel = std::string(1, static_cast<char>('a' + i));
        rows[i].summary = summaries(grid, est.frt_values);
    });
    return rows;
}

std::string trace_csv(const std::vector<TraceRow>& rows) {
    std::ostringstream out;
    out << "voxel,tau,tau_tilde,xi,zeta,kappa\n";
    for (const auto& r : rows) {
        out << r.voxel << ',' << format_double(r.summary.tau) << ','
            << format_double(r.summary.tau_tilde) << ',' << format_double(r.summary.xi) << ','
            << format_double(r.summary.zeta) << ',' << format_double(r.summary.kappa) << '\n';
    }
    return out.str();
}

// --- volume analysis --------------------------------------------------------

namespace {

std::string voxel_csv_header() {
    return "voxel,x,y,z,T,U,T_tilde,U_tilde,X,Q,Z,V,K,tau,tau_tilde,xi,zeta,kappa,gfa,"
           "p_U,p_Ut,p_Q,p_V,p_K,classification";
}

std::string voxel_csv_row(const VoxelRecord& r) {
    const auto p = [&](const char* name) {
        const auto it = r.report.p_values.find(name);
        return it == r.report.p_values.end() ? std::string("nan") : format_double(it->second);
    };
    std::ostringstream out;
    out << r.index << ',' << r.x << ',' << r.y << ',' << r.z << ','
        << format_double(r.report.T) << ',' << format_double(r.report.U) << ','
        << format_double(r.report.T_tilde) << ',' << format_double(r.report.U_tilde) << ','
        << format_double(r.report.X) << ',' << format_double(r.report.Q) << ','
        << format_double(r.report.Z) << ',' << format_double(r.report.V) << ','
        << format_double(r.report.K) << ',' << format_double(r.report.summary.tau) << ','
        << format_double(r.report.summary.tau_tilde) << ','
        << format_double(r.report.summary.xi) << ',' << format_double(r.report.summary.zeta)
        << ',' << format_double(r.report.summary.kappa) << ','
        << format_double(r.report.summary.gfa) << ',' << p("U") << ',' << p("Ut") << ','
        << p("Q") << ',' << p("V") << ',' << p("K") << ','
        << csv_field(voxel_class_name(r.report.classification));
    return out.str();
}

} // namespace

AnalyzeResult analyze_volume(const VolumeDataset& dataset, const TestParams& params,
                             const CalibrationStore& store, const std::string& out_dir,
                             int workers) {
    const int scheme_n = dataset.scheme.n();
    // Ingested data carries no simulator sigma; calibrations are looked up
    // by the noise level recorded in the store (single-sigma stores only).
    std::vector<double> sigmas;
    for (const auto& e : store.entries) {
        if (std::find(sigmas.begin(), sigmas.end(), e.sigma) == sigmas.end()) {
            sigmas.push_back(e.sigma);
        }
    }
    if (sigmas.size() != 1 || !store.complete_for(sigmas[0], scheme_n)) {
        throw std::runtime_error(
            "analyze_volume: need one complete calibration matching the scheme; run "
            "`qhardi calibrate` for this scheme and noise level first");
    }
    const CalibrationSet calibs = store.set_for(sigmas[0], scheme_n);

    fs::create_directories(out_dir);
    const fs::path chunks_dir = fs::path(out_dir) / "chunks";
    fs::create_directories(chunks_dir);

    std::vector<size_t> active;
    for (size_t v = 0; v < dataset.voxel_count(); ++v) {
        if (dataset.masked_in(v)) active.push_back(v);
    }

    const size_t chunk_size = 256;
    const size_t n_chunks = (active.size() + chunk_size - 1) / chunk_size;
    const auto tri = build_scheme_triangulation(dataset.scheme);
    const int nworkers = workers > 0 ? workers : default_workers();

    for (size_t chunk = 0; chunk < n_chunks; ++chunk) {
        char name[32];
        std::snprintf(name, sizeof name, "chunk_%06zu.csv", chunk);
        const fs::path chunk_path = chunks_dir / name;
        const size_t begin = chunk * chunk_size;
        const size_t end = std::min(active.size(), begin + chunk_size);
        const size_t count = end - begin;
        if (fs::exists(chunk_path)) {
            // Already complete from a previous run; verify the row count.
            std::ifstream in(chunk_path);
            size_t lines = 0;
            std::string line;
            while (std::getline(in, line)) ++lines;
            if (lines == count) continue;
        }
        std::vector<std::string> rows(count);
        parallel_for(static_cast<int>(count), nworkers, [&](int i) {
            const size_t voxel = active[begin + i];
            VoxelRecord rec;
            rec.index = voxel;
            rec.x = static_cast<int>(voxel % dataset.nx);
            rec.y = static_cast<int>((voxel / dataset.nx) % dataset.ny);
            rec.z = static_cast<int>(voxel / (static_cast<size_t>(dataset.nx) * dataset.ny));
            const HardiSample sample = dataset.sample_at(voxel);
            const NormalizedDiffusion nd = normalize(sample, tri);
            DominantOptions opts;
            opts.frt_L = params.frt_L;
            const DominantEstimate est = dominant_direction(nd, opts);
            const CircleGrid grid = fill_grid(nd, est, params.grid_n);
            rec.report = run_all_tests(grid, nd.sigma_star, calibs, params, est.frt_values);
            rows[i] = voxel_csv_row(rec);
        });
        const fs::path tmp = chunk_path.string() + ".tmp";
        {
            std::ofstream out(tmp);
            for (const auto& r : rows) out << r << '\n';
        }
        fs::rename(tmp, chunk_path);
    }

    // Merge chunks into stats.csv and re-parse into the in-memory result.
    AnalyzeResult result;
    {
        std::ofstream out(fs::path(out_dir) / "stats.csv");
        out << voxel_csv_header() << '\n';
        for (size_t chunk = 0; chunk < n_chunks; ++chunk) {
            char name[32];
            std::snprintf(name, sizeof name, "chunk_%06zu.csv", chunk);
            std::ifstream in(chunks_dir / name);
            std::string line;
            while (std::getline(in, line)) out << line << '\n';
        }
    }

    // Maps: statistic and p-value planes as flat float32, classification as
    // bytes (255 = outside mask).
    const size_t nvox = dataset.voxel_count();
    std::vector<std::string> stat_names = {"U", "Ut", "Q", "V", "K",
                                           "p_U", "p_Ut", "p_Q", "p_V", "p_K"};
    std::vector<std::vector<float>> maps(stat_names.size(),
                                         std::vector<float>(nvox, std::nanf("")));
    std::vector<std::uint8_t> class_map(nvox, 255);

    std::ifstream merged(fs::path(out_dir) / "stats.csv");
    std::string line;
    std::getline(merged, line); // header
    while (std::getline(merged, line)) {
        std::istringstream iss(line);
        std::vector<std::string> fields;
        std::string f;
        while (std::getline(iss, f, ',')) fields.push_back(f);
        if (fields.size() < 25) continue;
        VoxelRecord rec;
        rec.index = std::stoull(fields[0]);
        rec.x = std::stoi(fields[1]);
        rec.y = std::stoi(fields[2]);
        rec.z = std::stoi(fields[3]);
        rec.report.T = std::stod(fields[4]);
        rec.report.U = std::stod(fields[5]);
        rec.report.T_tilde = std::stod(fields[6]);
        rec.report.U_tilde = std::stod(fields[7]);
        rec.report.X = std::stod(fields[8]);
        rec.report.Q = std::stod(fields[9]);
        rec.report.Z = std::stod(fields[10]);
        rec.report.V = std::stod(fields[11]);
        rec.report.K = std::stod(fields[12]);
        rec.report.summary.tau = std::stod(fields[13]);
        rec.report.summary.tau_tilde = std::stod(fields[14]);
        rec.report.summary.xi = std::stod(fields[15]);
        rec.report.summary.zeta = std::stod(fields[16]);
        rec.report.summary.kappa = std::stod(fields[17]);
        rec.report.summary.gfa = std::stod(fields[18]);
        for (int i = 0; i < 5; ++i) rec.report.p_values[stat_names[5 + i]] = std::stod(fields[19 + i]);
        for (VoxelClass c : {VoxelClass::Isotropic, VoxelClass::UnimodalProlate,
                             VoxelClass::UnimodalScalene, VoxelClass::UnimodalAsymmetric,
                             VoxelClass::Multimodal, VoxelClass::Undetermined}) {
            if (voxel_class_name(c) == fields[24]) rec.report.classification = c;
        }
        const double vals[] = {rec.report.U, rec.report.U_tilde, rec.report.Q, rec.report.V,
                               rec.report.K};
        for (int i = 0; i < 5; ++i) maps[i][rec.index] = static_cast<float>(vals[i]);
        for (int i = 0; i < 5; ++i) {
            maps[5 + i][rec.index] =
                static_cast<float>(rec.report.p_values[stat_names[5 + i]]);
        }
        class_map[rec.index] = static_cast<std::uint8_t>(rec.report.classification);
        result.voxels.push_back(std::move(rec));
    }

    for (size_t i = 0; i < stat_names.size(); ++i) {
        std::ofstream out(fs::path(out_dir) / (stat_names[i] + ".f32"), std::ios::binary);
        out.write(reinterpret_cast<const char*>(maps[i].data()),
                  static_cast<std::streamsize>(maps[i].size() * sizeof(float)));
    }
    {
        std::ofstream out(fs::path(out_dir) / "classification.u8", std::ios::binary);
        out.write(reinterpret_cast<const char*>(class_map.data()),
                  static_cast<std::streamsize>(class_map.size()));
    }
    return result;
}

VolumeDataset synthesize_volume(int nx, int ny, int nz, ModelId model0, ModelId model1,
                                double sigma, const AcquisitionScheme& scheme,
                                std::uint64_t seed) {
    VolumeDataset ds;
    ds.nx = nx;
    ds.ny = ny;
    ds.nz = nz;
    ds.scheme = scheme;
    const size_t stride = ds.values_per_voxel();
    ds.data.resize(ds.voxel_count() * stride);
    for (size_t v = 0; v < ds.voxel_count(); ++v) {
        const int x = static_cast<int>(v % nx);
        const ModelId id = (x < nx / 2) ? model0 : model1;
        std::mt19937_64 rot_rng(derive_seed(seed, 2 * v));
        const Mat3 rot = uniform_rotation(rot_rng);
        const DiffusionModel model = make_paper_model(id, rot);
        const HardiSample s = acquire(model, scheme, sigma, derive_seed(seed, 2 * v + 1));
        for (size_t i = 0; i < s.raw_values.size(); ++i) {
            ds.data[v * stride + i] = static_cast<float>(s.raw_values[i]);
        }
        for (size_t i = 0; i < s.b0_values.size(); ++i) {
            ds.data[v * stride + s.raw_values.size() + i] = static_cast<float>(s.b0_values[i]);
        }
    }
    return ds;
}

std::uint64_t config_hash(const ExperimentConfig& config) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const std::string& s) {
        for (unsigned char ch : s) {
            h ^= ch;
            h *= 1099511628211ull;
        }
    };
    std::ostringstream out;
    for (ModelId m : config.models) out << model_name(m) << ',';
    out << '|';
    for (double s : config.noise_levels) out << format_double(s) << ',';
    out << '|' << config.scheme_n << '|' << config.scheme_path << '|' << config.replicates
        << '|' << config.params.grid_n << '|' << format_double(config.params.rho) << '|'
        << format_double(config.params.c) << '|' << config.params.m << '|'
        << config.params.m_prime << '|' << format_double(config.params.u_threshold) << '|'
        << config.params.frt_L << '|' << config.seed;
    mix(out.str());
    return h;
}

} // namespace qhardi
