#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "qhardi/harness.hpp"

using namespace qhardi;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* name) {
    const fs::path dir = fs::temp_directory_path() / "qhardi_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

/// Synthetic calibration table adequate for exercising plumbing without a
/// Monte Carlo run.
CalibrationStore synthetic_store(double sigma, int scheme_n) {
    CalibrationStore store;
    for (StatTag tag : {StatTag::U, StatTag::Utilde, StatTag::Q, StatTag::V, StatTag::K}) {
        NullCalibration cal;
        cal.stat = tag;
        cal.sigma = sigma;
        cal.scheme_n = scheme_n;
        cal.reps = 2000;
        cal.seed = 1;
        cal.mean = tag == StatTag::K ? 0.10 : 0.0;
        cal.sd = tag == StatTag::K ? 0.06 : 0.5;
        for (int i = 0; i <= 20; ++i) {
            const double lv = 0.005 + (0.995 - 0.005) * i / 20.0;
            cal.quantiles[lv] = cal.mean + cal.sd * (lv - 0.5) * 4.0;
        }
        store.entries.push_back(cal);
    }
    return store;
}

} // namespace

TEST_CASE("scheme file round trip") {
    const fs::path dir = temp_dir("scheme");
    AcquisitionScheme scheme = electrostatic_scheme(16, 3);
    scheme.b_value = 1234.5;
    const std::string path = (dir / "dirs.txt").string();
    write_scheme(scheme, path);
    const AcquisitionScheme back = read_scheme(path);
    CHECK(back.n() == 16);
    CHECK(back.n0 == 3);
    CHECK(back.b_value == doctest::Approx(1234.5));
    for (int i = 0; i < 16; ++i) {
        CHECK((back.directions[i].vec() - scheme.directions[i].vec()).norm() < 1e-9);
    }
    CHECK_THROWS(read_scheme((dir / "missing.txt").string()));
}

TEST_CASE("calibration table round trip") {
    const fs::path dir = temp_dir("cal");
    NullSpec spec;
    spec.stat = StatTag::K;
    spec.scheme = electrostatic_scheme(20);
    spec.sigma = 0.05;
    const NullCalibration cal = calibrate_null(spec, 120, 3, 4);
    write_calibrations({cal}, (dir / "thresholds.txt").string());
    const auto back = read_calibrations((dir / "thresholds.txt").string());
    REQUIRE(back.size() == 1);
    CHECK(back[0].stat == StatTag::K);
    CHECK(back[0].spec_hash == cal.spec_hash);
    CHECK(back[0].mean == doctest::Approx(cal.mean).epsilon(1e-9));
    CHECK(back[0].sd == doctest::Approx(cal.sd).epsilon(1e-9));
    CHECK(back[0].reps == cal.reps);
    CHECK(back[0].quantiles.size() == cal.quantiles.size());

    CHECK(find_calibration(back, StatTag::K, 0.05, 20).has_value());
    CHECK_FALSE(find_calibration(back, StatTag::K, 0.06, 20).has_value());
    CHECK_FALSE(find_calibration(back, StatTag::U, 0.05, 20).has_value());
}

TEST_CASE("volume round trip and layout") {
    const fs::path dir = temp_dir("vol");
    const AcquisitionScheme scheme = electrostatic_scheme(8, 2);
    VolumeDataset ds = synthesize_volume(3, 2, 2, ModelId::A1, ModelId::A3, 0.02, scheme, 5);
    CHECK(ds.data.size() == 12u * 10u);

    write_volume(ds, (dir / "vol.hdr").string(), (dir / "vol.scheme").string(),
                 (dir / "vol.f32").string());
    const VolumeDataset back = read_volume((dir / "vol.hdr").string());
    CHECK(back.nx == 3);
    CHECK(back.voxel_count() == 12);
    CHECK(back.data == ds.data);

    const HardiSample s = back.sample_at(5);
    CHECK(s.raw_values.size() == 8);
    CHECK(s.b0_values.size() == 2);
    CHECK(s.noise_sigma == -1.0);
    CHECK(s.raw_values[0] == doctest::Approx(ds.data[5 * 10 + 0]));
    CHECK(s.b0_values[1] == doctest::Approx(ds.data[5 * 10 + 9]));

    // Corrupt the data length: descriptive failure.
    {
        std::ofstream bad((dir / "vol.f32").string(), std::ios::binary | std::ios::trunc);
        bad << "xx";
    }
    CHECK_THROWS_WITH_AS(read_volume((dir / "vol.hdr").string()),
                         doctest::Contains("size mismatch"), std::runtime_error);
}

TEST_CASE("fiber trace shape and mirror symmetry") {
    TestParams params;
    params.grid_n = 64; // keep the unit run fast; acceptance uses 128
    const auto fork = run_fiber_trace(FiberKind::Forking, params, 2, 4);
    CHECK(fork.size() == 7);
    CHECK(fork[0].voxel == "a");
    CHECK(fork[6].voxel == "g");
    const auto cross = run_fiber_trace(FiberKind::Crossing, params, 2, 4);
    CHECK(cross.size() == 6);
    // End voxels and the c/e pair are the same model: identical summaries.
    CHECK(cross[0].summary.tau == cross[5].summary.tau);
    CHECK(cross[2].summary.tau == cross[4].summary.tau);
    CHECK(cross[2].summary.kappa == cross[4].summary.kappa);

    const std::string csv = trace_csv(fork);
    CHECK(csv.rfind("voxel,tau,tau_tilde,xi,zeta,kappa\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 8);
}

TEST_CASE("table3 zero-noise degeneracy and worker determinism") {
    ExperimentConfig cfg;
    cfg.models = {ModelId::A1, ModelId::A3};
    cfg.noise_levels = {0.0};
    cfg.scheme_n = 16;
    cfg.replicates = 4;
    cfg.seed = 3;
    cfg.params.grid_n = 32;
    cfg.workers = 1;
    const CalibrationStore store = calibrate_for(cfg, 100);

    const Table3Result r1 = run_table3(cfg, store);
    cfg.workers = 5;
    const Table3Result r2 = run_table3(cfg, store);
    CHECK(r1.csv() == r2.csv()); // byte identical regardless of workers

    for (const auto& cell : r1.cells) {
        CHECK((cell.rejected == 0 || cell.rejected == cell.denominator));
        CHECK(cell.rejected <= cell.denominator);
    }
    // Zero noise: anisotropy always detected for A1, never for A3.
    CHECK(r1.cell(ModelId::A1, 0.0, StatTag::U).rejected == 4);
    CHECK(r1.cell(ModelId::A3, 0.0, StatTag::U).rejected == 0);

    // Missing calibration points at the calibrate command.
    cfg.noise_levels = {0.25};
    CHECK_THROWS_WITH_AS(run_table3(cfg, store), doctest::Contains("calibrate"),
                         std::runtime_error);
}

TEST_CASE("table3 csv structure") {
    ExperimentConfig cfg;
    cfg.models = {ModelId::A3};
    cfg.noise_levels = {0.0};
    cfg.scheme_n = 16;
    cfg.replicates = 2;
    cfg.params.grid_n = 32;
    cfg.workers = 1;
    const Table3Result r = run_table3(cfg, calibrate_for(cfg, 100));
    const std::string csv = r.csv();
    CHECK(csv.rfind("model,sigma,statistic,rejected,denominator,rejected_all,replicates,"
                    "threshold\n", 0) == 0);
    CHECK(r.cells.size() == 5);
    const std::string pretty = r.pretty();
    CHECK(pretty.find("sigma = 0") != std::string::npos);
}

TEST_CASE("analyze_volume end to end with resume") {
    const fs::path dir = temp_dir("analyze");
    const AcquisitionScheme scheme = electrostatic_scheme(20);
    const VolumeDataset ds = synthesize_volume(4, 1, 1, ModelId::A1, ModelId::A1, 0.05,
                                               scheme, 11);
    const CalibrationStore store = synthetic_store(0.05, 20);
    TestParams params;
    params.grid_n = 32;

    const AnalyzeResult first = analyze_volume(ds, params, store, (dir / "out").string(), 2);
    CHECK(first.voxels.size() == 4);
    CHECK(fs::exists(dir / "out" / "stats.csv"));
    CHECK(fs::exists(dir / "out" / "classification.u8"));
    CHECK(fs::exists(dir / "out" / "U.f32"));

    std::ifstream in(dir / "out" / "stats.csv");
    std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    // Resume: chunk files are reused, outputs identical.
    fs::remove(dir / "out" / "stats.csv");
    const AnalyzeResult second = analyze_volume(ds, params, store, (dir / "out").string(), 1);
    std::ifstream in2(dir / "out" / "stats.csv");
    std::string all2((std::istreambuf_iterator<char>(in2)), std::istreambuf_iterator<char>());
    CHECK(all == all2);
    CHECK(second.voxels.size() == 4);

    // Empty mask: success with empty outputs.
    VolumeDataset masked = ds;
    masked.mask.assign(masked.voxel_count(), 0);
    const AnalyzeResult none =
        analyze_volume(masked, params, store, (dir / "out_empty").string(), 1);
    CHECK(none.voxels.empty());
    CHECK(fs::exists(dir / "out_empty" / "stats.csv"));
}

TEST_CASE("config hash stability") {
    ExperimentConfig a, b;
    CHECK(config_hash(a) == config_hash(b));
    b.seed = 99;
    CHECK(config_hash(a) != config_hash(b));
    b = a;
    b.noise_levels = {0.1};
    CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("csv quoting") {
    CHECK(csv_field("plain") == "plain");
    CHECK(csv_field("a,b") == "\"a,b\"");
    CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
}
