// Command-line front end: phantom simulation, null calibration, rejection
// tables, fiber traces and batch volume analysis.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "qhardi/harness.hpp"
#include "qhardi/parallel.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

double parse_noise(const std::string& text) {
    const auto slash = text.find('/');
    if (slash != std::string::npos) {
        const double num = std::stod(text.substr(0, slash));
        const double den = std::stod(text.substr(slash + 1));
        if (den == 0.0) throw CLI::ValidationError("noise", "zero denominator");
        return num / den;
    }
    return std::stod(text);
}

std::vector<double> parse_noise_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) out.push_back(parse_noise(tok));
    }
    if (out.empty()) throw CLI::ValidationError("noise", "empty noise list");
    return out;
}

std::vector<qhardi::ModelId> parse_models(const std::string& csv) {
    std::vector<qhardi::ModelId> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) out.push_back(qhardi::model_from_name(tok));
    }
    if (out.empty()) throw CLI::ValidationError("models", "empty model list");
    return out;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

struct ParamFlags {
    int grid_n = 128;
    double rho = 3.0;
    double c = 2.0;
    int m = 9, m_prime = 16;
    double u_threshold = 0.1185;
    bool u_conservative = false;
    int frt_l = 48;
    std::string mad = "max";
    double k_level = 0.10;

    void attach(CLI::App* cmd) {
        cmd->add_option("--grid-n", grid_n, "circle grid size N (multiple of 8)");
        cmd->add_option("--rho", rho, "noise-scale constant, 0 < rho <= 3");
        cmd->add_option("--c", c, "multimodality boundary ratio");
        cmd->add_option("--m", m, "degrees-of-freedom parameter m");
        cmd->add_option("--mprime", m_prime, "degrees-of-freedom parameter m'");
        cmd->add_option("--u-threshold", u_threshold, "anisotropy threshold");
        cmd->add_flag("--u-conservative", u_conservative,
                      "use the conservative anisotropy threshold 1.9637");
        cmd->add_option("--frt-L", frt_l, "quadrature nodes per great circle");
        cmd->add_option("--mad", mad, "deviation estimator: max or median");
        cmd->add_option("--k-level", k_level, "two-sided level of the asymmetry test");
    }

    qhardi::TestParams to_params() const {
        qhardi::TestParams p;
        p.grid_n = grid_n;
        p.rho = rho;
        p.c = c;
        p.m = m;
        p.m_prime = m_prime;
        p.u_threshold = u_conservative ? 1.9637 : u_threshold;
        p.frt_L = frt_l;
        p.mad = mad == "median" ? qhardi::MadKind::MedianAbs : qhardi::MadKind::MaxAbs;
        p.k_level = k_level;
        return p;
    }
};

} // namespace

int main(int argc, char** argv) {
    using namespace qhardi;

    CLI::App app{"q-space diffusion structure toolkit"};
    app.set_config("--config")->configurable(false);
    app.require_subcommand(1);

    int workers = 0;
    std::uint64_t seed = 1;
    app.add_option("--workers", workers, "worker threads (default: QHARDI_WORKERS or cores)")
        ->configurable(true);
    app.add_option("--seed", seed, "random stream seed")->configurable(true);

    // scheme
    auto* cmd_scheme = app.add_subcommand("scheme", "emit an acquisition direction scheme");
    int scheme_n = 60, scheme_n0 = 1;
    double scheme_b = 1600.0;
    std::string scheme_out;
    cmd_scheme->add_option("--n", scheme_n, "number of directions")->required();
    cmd_scheme->add_option("--n0", scheme_n0, "number of b=0 acquisitions");
    cmd_scheme->add_option("--b", scheme_b, "b-value metadata (s/mm^2)");
    cmd_scheme->add_option("--out", scheme_out, "output path")->required();

    // simulate
    auto* cmd_sim = app.add_subcommand("simulate", "synthesize a phantom volume");
    std::string sim_models = "A1", sim_dims = "4,4,1", sim_noise = "1/20", sim_out;
    int sim_scheme_n = 60;
    std::string sim_scheme_path;
    cmd_sim->add_option("--model", sim_models, "model, or two comma-separated models for a "
                                               "two-region volume (A1..A6)");
    cmd_sim->add_option("--dims", sim_dims, "volume dimensions nx,ny,nz");
    cmd_sim->add_option("--noise", sim_noise, "channel sigma in units of A(0), e.g. 1/20");
    cmd_sim->add_option("--scheme-n", sim_scheme_n, "electrostatic scheme size");
    cmd_sim->add_option("--scheme", sim_scheme_path, "scheme file (overrides --scheme-n)");
    cmd_sim->add_option("--out", sim_out, "output prefix (writes .hdr/.scheme/.f32)")
        ->required();

    // calibrate
    auto* cmd_cal = app.add_subcommand("calibrate", "Monte Carlo null calibration");
    std::string cal_noise = "1/30", cal_out;
    int cal_reps = 1000, cal_scheme_n = 60;
    std::string cal_scheme_path;
    ParamFlags cal_params;
    cmd_cal->add_option("--noise", cal_noise, "noise levels, e.g. 1/30,1/2");
    cmd_cal->add_option("--reps", cal_reps, "replicates per statistic");
    cmd_cal->add_option("--scheme-n", cal_scheme_n, "electrostatic scheme size");
    cmd_cal->add_option("--scheme", cal_scheme_path, "scheme file (overrides --scheme-n)");
    cmd_cal->add_option("--out", cal_out, "threshold table output path")->required();
    cal_params.attach(cmd_cal);

    // table3
    auto* cmd_t3 = app.add_subcommand("table3", "Monte Carlo rejection table");
    std::string t3_models = "A1,A2,A3,A4,A5,A6", t3_noise = "1/30", t3_out, t3_thresholds;
    int t3_reps = 200, t3_scheme_n = 60, t3_cal_reps = 1000;
    bool t3_auto = false;
    std::string t3_scheme_path, t3_save_thresholds;
    ParamFlags t3_params;
    cmd_t3->add_option("--models", t3_models, "comma-separated models");
    cmd_t3->add_option("--noise", t3_noise, "noise levels, e.g. 1/30,1/2");
    cmd_t3->add_option("--reps", t3_reps, "replicates per cell");
    cmd_t3->add_option("--scheme-n", t3_scheme_n, "electrostatic scheme size");
    cmd_t3->add_option("--scheme", t3_scheme_path, "scheme file (overrides --scheme-n)");
    cmd_t3->add_option("--thresholds", t3_thresholds, "calibration table path");
    cmd_t3->add_flag("--auto-calibrate", t3_auto, "calibrate in-process instead");
    cmd_t3->add_option("--cal-reps", t3_cal_reps, "replicates for --auto-calibrate");
    cmd_t3->add_option("--save-thresholds", t3_save_thresholds,
                       "write the (auto) calibration table here");
    cmd_t3->add_option("--out", t3_out, "CSV output path");
    t3_params.attach(cmd_t3);

    // trace
    auto* cmd_trace = app.add_subcommand("trace", "noiseless fiber-evolution summaries");
    std::string trace_kind = "forking", trace_out;
    int trace_level = 4;
    ParamFlags trace_params;
    cmd_trace->add_option("--kind", trace_kind, "forking or crossing")->required();
    cmd_trace->add_option("--dense-level", trace_level, "icosphere level of the dense scheme");
    cmd_trace->add_option("--out", trace_out, "CSV output path");
    trace_params.attach(cmd_trace);

    // analyze
    auto* cmd_an = app.add_subcommand("analyze", "batch-analyze a volume into maps");
    std::string an_volume, an_thresholds, an_out;
    ParamFlags an_params;
    cmd_an->add_option("--volume", an_volume, "volume header path")->required();
    cmd_an->add_option("--thresholds", an_thresholds, "calibration table path")->required();
    cmd_an->add_option("--out", an_out, "output directory")->required();
    an_params.attach(cmd_an);

    // Global flags may appear after the subcommand name.
    for (CLI::App* sub : app.get_subcommands([](const CLI::App*) { return true; })) {
        sub->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        std::cerr << e.what() << "\n" << app.help() << std::flush;
        return 2;
    }

    if (workers <= 0) workers = default_workers();

    try {
        if (*cmd_scheme) {
            AcquisitionScheme s = electrostatic_scheme(scheme_n, scheme_n0);
            s.b_value = scheme_b;
            write_scheme(s, scheme_out);
            std::printf("qhardi %s: wrote %d-direction scheme to %s\n", kVersion, s.n(),
                        scheme_out.c_str());
            return 0;
        }

        if (*cmd_sim) {
            const auto models = parse_models(sim_models);
            int nx, ny, nz;
            if (std::sscanf(sim_dims.c_str(), "%d,%d,%d", &nx, &ny, &nz) != 3 || nx < 1 ||
                ny < 1 || nz < 1) {
                std::cerr << "malformed --dims: " << sim_dims << "\n";
                return 2;
            }
            const AcquisitionScheme scheme = sim_scheme_path.empty()
                                                 ? electrostatic_scheme(sim_scheme_n)
                                                 : read_scheme(sim_scheme_path);
            const ModelId m0 = models.front();
            const ModelId m1 = models.size() > 1 ? models[1] : models.front();
            const VolumeDataset ds =
                synthesize_volume(nx, ny, nz, m0, m1, parse_noise(sim_noise), scheme, seed);
            write_volume(ds, sim_out + ".hdr", sim_out + ".scheme", sim_out + ".f32");
            std::printf("qhardi %s: wrote %zu-voxel volume to %s.hdr\n", kVersion,
                        ds.voxel_count(), sim_out.c_str());
            return 0;
        }

        if (*cmd_cal) {
            ExperimentConfig cfg;
            cfg.noise_levels = parse_noise_list(cal_noise);
            cfg.scheme_n = cal_scheme_n;
            cfg.scheme_path = cal_scheme_path;
            cfg.params = cal_params.to_params();
            cfg.seed = seed;
            cfg.workers = workers;
            std::printf("qhardi %s config=%016llx\n", kVersion,
                        static_cast<unsigned long long>(config_hash(cfg)));
            const CalibrationStore store = calibrate_for(cfg, cal_reps);
            write_calibrations(store.entries, cal_out);
            std::printf("wrote %zu calibrations to %s\n", store.entries.size(),
                        cal_out.c_str());
            return 0;
        }

        if (*cmd_t3) {
            ExperimentConfig cfg;
            cfg.models = parse_models(t3_models);
            cfg.noise_levels = parse_noise_list(t3_noise);
            cfg.scheme_n = t3_scheme_n;
            cfg.scheme_path = t3_scheme_path;
            cfg.replicates = t3_reps;
            cfg.params = t3_params.to_params();
            cfg.seed = seed;
            cfg.workers = workers;
            std::printf("qhardi %s config=%016llx\n", kVersion,
                        static_cast<unsigned long long>(config_hash(cfg)));
            CalibrationStore store;
            if (!t3_thresholds.empty()) {
                store.entries = read_calibrations(t3_thresholds);
            } else if (t3_auto) {
                store = calibrate_for(cfg, t3_cal_reps);
            } else {
                std::cerr << "table3 needs --thresholds FILE or --auto-calibrate; run "
                             "`qhardi calibrate` first\n";
                return 2;
            }
            if (!t3_save_thresholds.empty()) {
                write_calibrations(store.entries, t3_save_thresholds);
            }
            const Table3Result result = run_table3(cfg, store);
            if (!t3_out.empty()) write_text(t3_out, result.csv());
            std::printf("%s", result.pretty().c_str());
            return 0;
        }

        if (*cmd_trace) {
            FiberKind kind;
            if (trace_kind == "forking") kind = FiberKind::Forking;
            else if (trace_kind == "crossing") kind = FiberKind::Crossing;
            else {
                std::cerr << "unknown --kind: " << trace_kind << " (forking|crossing)\n";
                return 2;
            }
            std::printf("qhardi %s\n", kVersion);
            const auto rows = run_fiber_trace(kind, trace_params.to_params(), trace_level,
                                              workers);
            const std::string csv = trace_csv(rows);
            if (!trace_out.empty()) write_text(trace_out, csv);
            std::printf("%s", csv.c_str());
            return 0;
        }

        if (*cmd_an) {
            std::printf("qhardi %s\n", kVersion);
            const VolumeDataset ds = read_volume(an_volume);
            CalibrationStore store;
            store.entries = read_calibrations(an_thresholds);
            const AnalyzeResult res =
                analyze_volume(ds, an_params.to_params(), store, an_out, workers);
            std::printf("analyzed %zu voxels into %s\n", res.voxels.size(), an_out.c_str());
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
