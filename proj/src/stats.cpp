#include "qhardi/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "qhardi/parallel.hpp"

namespace qhardi {

namespace {

constexpr double kLogFloor = 1e-12;
const double kNaN = std::numeric_limits<double>::quiet_NaN();
const double kInf = std::numeric_limits<double>::infinity();

bool loggable(double v) { return v > kLogFloor; }

struct GridRanges {
    double dom_max = 0, dom_min = 0;
    double avg_max = 0, avg_min = 0;
    bool ok = false;
};

GridRanges ranges_of(const CircleGrid& g) {
    GridRanges r;
    if (!g.filled()) return r;
    r.dom_max = *std::max_element(g.dominant_values.begin(), g.dominant_values.end());
    r.dom_min = *std::min_element(g.dominant_values.begin(), g.dominant_values.end());
    r.avg_max = -kInf;
    r.avg_min = kInf;
    for (int j = 0; j < g.n; ++j) {
        const double a = g.avg_perp(j);
        r.avg_max = std::max(r.avg_max, a);
        r.avg_min = std::min(r.avg_min, a);
    }
    r.ok = r.dom_min > 0.0 && r.avg_min > 0.0;
    return r;
}

double t_statistic(const GridRanges& r) {
    return (r.avg_max / r.avg_min) / (r.dom_max / r.dom_min) - 1.0;
}

/// min over k of the dynamic range within each perpendicular circle,
/// divided by the dominant-circle range, minus one.
double t_tilde_statistic(const CircleGrid& g, const GridRanges& r) {
    double min_ratio = kInf;
    for (int k = 0; k < g.n; ++k) {
        double mx = -kInf, mn = kInf;
        for (int j = 0; j < g.n; ++j) {
            const double v = g.perp_value_at(j, k);
            mx = std::max(mx, v);
            mn = std::min(mn, v);
        }
        if (!(mn > 0.0)) return kNaN;
        min_ratio = std::min(min_ratio, mx / mn);
    }
    return min_ratio / (r.dom_max / r.dom_min) - 1.0;
}

struct KappaParts {
    std::vector<double> P_k;
    int k_breve_max = 0;
    double K = 0.0;
    bool ok = false;
};

KappaParts kappa_parts(const CircleGrid& g) {
    KappaParts kp;
    const int n = g.n;
    kp.P_k.resize(n);
    for (int k = 0; k < n; ++k) {
        double num = 0.0, den = 0.0;
        for (int j = 1; j <= n / 4 - 1; ++j) {
            num += g.perp_value_at(j, k) - g.perp_value_at(j + n / 4, k);
        }
        for (int j = 1; j <= n; ++j) den += g.perp_value_at(j, k);
        if (!(den > 0.0)) return kp;
        kp.P_k[k] = 8.0 * num / den;
    }
    kp.k_breve_max = static_cast<int>(
        std::max_element(kp.P_k.begin(), kp.P_k.end()) - kp.P_k.begin());
    double acc = 0.0;
    for (int k = kp.k_breve_max - n / 8; k <= kp.k_breve_max + n / 8; ++k) {
        acc += kp.P_k[g.wrap(k)];
    }
    kp.K = acc / (n / 4 + 1);
    kp.ok = true;
    return kp;
}

double two_sided_gauss_p(double z) { return std::erfc(std::abs(z) / std::numbers::sqrt2); }

double two_sided_gauss_z(double level) {
    double lo = 0.0, hi = 12.0;
    for (int i = 0; i < 100; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (two_sided_gauss_p(mid) > level) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace

SummarySet summaries(const CircleGrid& grid, std::span<const double> frt_values) {
    if (!grid.filled()) throw std::invalid_argument("summaries: grid not filled");
    SummarySet s;

    // GFA over the orientational samples, zero for constant input.
    if (!frt_values.empty()) {
        double total = 0.0;
        for (double f : frt_values) total += f;
        if (total > 0.0) {
            const double n = static_cast<double>(frt_values.size());
            double ss = 0.0, dev = 0.0;
            for (double f : frt_values) {
                const double psi = f / total;
                ss += psi * psi;
                const double d = psi - 1.0 / n;
                dev += d * d;
            }
            if (ss > 0.0 && n > 1) s.gfa = std::sqrt(n * dev / ((n - 1) * ss));
        }
    }

    const GridRanges r = ranges_of(grid);
    const double grid_min = std::min(
        r.dom_min, *std::min_element(grid.perp_values.begin(), grid.perp_values.end()));
    const double grid_max = std::max(
        r.dom_max, *std::max_element(grid.perp_values.begin(), grid.perp_values.end()));
    if (grid_min == grid_max) {
        // Exactly isotropic grid.
        s.tau = 0.0;
        s.tau_tilde = 0.0;
        s.xi = 1.0;
        s.zeta = 1.0;
        s.kappa = 0.0;
        return s;
    }
    if (!loggable(grid_min)) {
        s.low_snr = true;
        s.tau = s.tau_tilde = s.xi = s.zeta = s.kappa = kNaN;
        return s;
    }

    s.tau = t_statistic(r);
    s.tau_tilde = t_tilde_statistic(grid, r);

    const double a_perp0 = grid.avg_perp(grid.equator_index());
    const double a_perp1 = grid.avg_perp(grid.pole_index());
    s.xi = std::log(a_perp0) / std::log(a_perp1);

    double zeta = -kInf;
    for (int k = 0; k < grid.n; ++k) {
        const double num = std::log(grid.dominant_value_at(k));
        const double den = std::log(grid.dominant_value_at(k + grid.n / 4));
        if (den != 0.0) zeta = std::max(zeta, num / den);
    }
    s.zeta = zeta;

    const KappaParts kp = kappa_parts(grid);
    s.kappa = kp.ok ? kp.K : kNaN;
    if (!std::isfinite(s.tau) || !std::isfinite(s.tau_tilde) || !std::isfinite(s.xi) ||
        !std::isfinite(s.zeta) || !std::isfinite(s.kappa)) {
        s.low_snr = true;
    }
    return s;
}

double adc(double value, double b) {
    if (!(value > 0.0)) throw std::domain_error("adc: value must be positive");
    if (!(b > 0.0)) throw std::domain_error("adc: b must be positive");
    return -std::log(value) / b;
}

UResult test_U(const CircleGrid& grid, double abar_N, double sigma_A, double threshold) {
    UResult res;
    const GridRanges r = ranges_of(grid);
    if (!r.ok) {
        res.decision = Decision::Undefined;
        res.T = res.U = kNaN;
        return res;
    }
    res.T = t_statistic(r);
    if (sigma_A <= kLogFloor) {
        // Noiseless constant circle: decide on T alone, with a dead zone
        // absorbing last-ulp residue of exactly flat grids.
        res.sigma_zero = true;
        res.U = res.T > 1e-9 ? kInf : 0.0;
        res.decision = res.T > 1e-9 ? Decision::Reject : Decision::Fail;
        return res;
    }
    res.U = res.T * abar_N / sigma_A;
    res.decision = res.U > threshold ? Decision::Reject : Decision::Fail;
    return res;
}

UtildeResult test_U_tilde(const CircleGrid& grid, double sigma_A, double c, double threshold) {
    UtildeResult res;
    const GridRanges r = ranges_of(grid);
    if (!r.ok) {
        res.decision = Decision::Undefined;
        res.T_tilde = res.U_tilde = kNaN;
        return res;
    }
    res.T_tilde = t_tilde_statistic(grid, r);
    if (!std::isfinite(res.T_tilde)) {
        res.decision = Decision::Undefined;
        return res;
    }
    const double a_min = grid.perp_value_at(grid.pole_index(), 0);
    const double centered = res.T_tilde - (c - 1.0);
    if (sigma_A <= kLogFloor) {
        res.U_tilde = centered > 1e-9 ? kInf : (centered < -1e-9 ? -kInf : 0.0);
        res.decision = centered > 1e-9 ? Decision::Reject : Decision::Fail;
        return res;
    }
    res.U_tilde = centered * a_min / (sigma_A * std::sqrt(2.0 * c * c + 2.0));
    res.decision = res.U_tilde > threshold ? Decision::Reject : Decision::Fail;
    return res;
}

QResult test_Q(const CircleGrid& grid, double sigma2, double rho, double threshold_lower) {
    QResult res;
    const double a0 = grid.avg_perp(grid.equator_index());
    const double a1 = grid.avg_perp(grid.pole_index());
    if (!loggable(a0) || !loggable(a1)) {
        res.decision = Decision::Undefined;
        res.X = res.Q = kNaN;
        return res;
    }
    res.X = std::log(a0) / std::log(a1);

    res.X_k.resize(grid.n, kNaN);
    const double pole = grid.perp_value_at(grid.pole_index(), 0);
    if (loggable(pole)) {
        const double lp = std::log(pole);
        for (int k = 0; k < grid.n; ++k) {
            const double v = grid.dominant_value_at(k);
            if (loggable(v) && lp != 0.0) res.X_k[k] = std::log(v) / lp;
        }
    }

    double abar = 0.0;
    for (double v : grid.dominant_values) abar += v;
    abar /= grid.n;
    const double scale = std::abs(abar * std::log(abar));
    if (sigma2 <= kLogFloor) {
        res.Q = res.X < 1.0 - 1e-9 ? -kInf : (res.X > 1.0 + 1e-9 ? kInf : 0.0);
        res.decision = res.X < 1.0 - 1e-9 ? Decision::Reject : Decision::Fail;
        return res;
    }
    res.Q = rho * (res.X - 1.0) * scale / sigma2;
    res.decision = res.Q < threshold_lower ? Decision::Reject : Decision::Fail;
    return res;
}

VResult test_V(const CircleGrid& grid, double sigma2, int m, int m_prime, double threshold) {
    if (!(m < m_prime && m_prime < 2 * m)) {
        throw std::invalid_argument("test_V: need m < m' < 2m");
    }
    if (grid.n % (2 * m_prime) != 0) {
        throw std::invalid_argument("test_V: N/(2m') must be an integer");
    }
    VResult res;
    const int shift = grid.n / (2 * m_prime);

    double best = -kInf;
    for (int k = 1; k <= grid.n / 4; ++k) {
        const double num = grid.dominant_value_at(k);
        const double den = grid.dominant_value_at(k + grid.n / 4);
        if (!loggable(num) || !loggable(den)) {
            res.decision = Decision::Undefined;
            res.Z = res.V = kNaN;
            return res;
        }
        const double ratio = std::log(num) / std::log(den);
        if (ratio > best) {
            best = ratio;
            res.k_max = k;
        }
    }
    const double zn = grid.dominant_value_at(res.k_max + shift);
    const double zd = grid.dominant_value_at(res.k_max + shift + grid.n / 4);
    if (!loggable(zn) || !loggable(zd) || std::log(zd) == 0.0) {
        res.decision = Decision::Undefined;
        res.Z = res.V = kNaN;
        return res;
    }
    res.Z = std::log(zn) / std::log(zd);

    double abar = 0.0;
    for (double v : grid.dominant_values) abar += v;
    abar /= grid.n;
    const double scale = std::abs(abar * std::log(abar));
    if (sigma2 <= kLogFloor) {
        res.V = res.Z > 1.0 + 1e-9 ? kInf : (res.Z < 1.0 - 1e-9 ? -kInf : 0.0);
        res.decision = res.Z > 1.0 + 1e-9 ? Decision::Reject : Decision::Fail;
        return res;
    }
    res.V = (res.Z - 1.0) * scale / sigma2;
    res.decision = res.V > threshold ? Decision::Reject : Decision::Fail;
    return res;
}

KResult test_K(const CircleGrid& grid, double null_mean, double null_sd, double level) {
    KResult res;
    const KappaParts kp = kappa_parts(grid);
    if (!kp.ok) {
        res.decision = Decision::Undefined;
        res.K = res.K_standardized = kNaN;
        return res;
    }
    res.P_k = kp.P_k;
    res.k_breve_max = kp.k_breve_max;
    res.K = kp.K;
    if (null_sd > 0.0) {
        res.K_standardized = (res.K - null_mean) / null_sd;
    } else {
        res.K_standardized = res.K == null_mean ? 0.0 : (res.K > null_mean ? kInf : -kInf);
    }
    res.decision = two_sided_gauss_p(res.K_standardized) < level ? Decision::Reject
                                                                 : Decision::Fail;
    return res;
}

// --- calibration ----------------------------------------------------------

std::string stat_name(StatTag tag) {
    switch (tag) {
    case StatTag::U: return "U";
    case StatTag::Utilde: return "Ut";
    case StatTag::Q: return "Q";
    case StatTag::V: return "V";
    case StatTag::K: return "K";
    }
    return "?";
}

StatTag stat_from_name(const std::string& name) {
    for (StatTag t : {StatTag::U, StatTag::Utilde, StatTag::Q, StatTag::V, StatTag::K}) {
        if (stat_name(t) == name) return t;
    }
    throw std::invalid_argument("unknown statistic tag: " + name);
}

std::uint64_t NullSpec::hash() const {
    std::uint64_t h = 1469598103934665603ull; // FNV-1a
    auto mix = [&h](const std::string& s) {
        for (unsigned char ch : s) {
            h ^= ch;
            h *= 1099511628211ull;
        }
    };
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s|%.17g|%d|%.17g|%.17g|%d|%d|%d|%d|%d|%.6g", //
                  stat_name(stat).c_str(), sigma, grid_n, rho, c, m, m_prime, frt_L,
                  static_cast<int>(mad), scheme.n0, scheme.b_value);
    mix(buf);
    for (const auto& d : scheme.directions) {
        std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g;", d.x(), d.y(), d.z());
        mix(buf);
    }
    return h;
}

double NullCalibration::quantile(double level) const {
    if (quantiles.empty()) throw std::runtime_error("calibration has no quantiles");
    const double tail = std::min(level, 1.0 - level);
    // Zero-noise calibrations are degenerate, so the order statistics are
    // exact at any replicate count.
    if (sigma > 0.0 && (tail * reps < 10.0 || (tail <= 0.051 && reps < 1000))) {
        throw std::runtime_error("too few replicates for requested quantile level");
    }
    auto hi = quantiles.lower_bound(level);
    if (hi == quantiles.end()) return std::prev(hi)->second;
    if (hi->first == level || hi == quantiles.begin()) return hi->second;
    auto lo = std::prev(hi);
    const double f = (level - lo->first) / (hi->first - lo->first);
    return lo->second + f * (hi->second - lo->second);
}

double NullCalibration::threshold(double level) const {
    switch (stat) {
    case StatTag::U: return quantile(1.0 - (level > 0 ? level : 0.05));
    case StatTag::V: return quantile(1.0 - (level > 0 ? level : 0.05));
    case StatTag::Utilde: return quantile(1.0 - (level > 0 ? level : 0.10));
    case StatTag::Q: return quantile(level > 0 ? level : 0.05);
    case StatTag::K:
        // Two-sided Gaussian on the standardized statistic.
        return mean + two_sided_gauss_z(level > 0 ? level : 0.10) * sd;
    }
    throw std::logic_error("unreachable");
}

double NullCalibration::p_value(double observed) const {
    if (stat == StatTag::K) {
        if (sd <= 0.0) return observed == mean ? 1.0 : 0.0;
        return two_sided_gauss_p((observed - mean) / sd);
    }
    // Empirical CDF by interpolating the stored quantile grid.
    const double pmin = 1.0 / (reps + 1.0);
    auto cdf = [&](double x) {
        auto it = quantiles.begin();
        if (x <= it->second) return pmin;
        auto last = std::prev(quantiles.end());
        if (x >= last->second) return 1.0 - pmin;
        auto prev = it;
        for (++it; it != quantiles.end(); ++it) {
            if (x <= it->second) {
                const double span = it->second - prev->second;
                const double f = span > 0 ? (x - prev->second) / span : 0.0;
                return prev->first + f * (it->first - prev->first);
            }
            prev = it;
        }
        return 1.0 - pmin;
    };
    const double c = cdf(observed);
    return stat == StatTag::Q ? c : 1.0 - c;
}

DiffusionModel null_model_for(StatTag stat, double c, const Mat3& rotation) {
    switch (stat) {
    case StatTag::U:
    case StatTag::Q:
        return make_paper_model(ModelId::A3, rotation);
    case StatTag::Utilde: {
        // Unimodal tensor tuned to the multimodality boundary: the smallest
        // perpendicular-circle dynamic range equals c times the dominant
        // range exactly. The scalene minor pair (15, 1) keeps the dominant
        // range well above the noise floor, so the simulated statistic stays
        // centered at the boundary instead of being dragged below it by
        // noise inflation of a flat circle.
        const double t = 0.04;
        const double l2 = 15.0, l3 = 1.0;
        const double l1 = l2 + std::log(c) / t + (l2 - l3);
        const Frame f = rotate_frame(Frame::canonical(), rotation);
        return EllipsoidModel{{l1, l2, l3}, f};
    }
    case StatTag::V:
    case StatTag::K:
        return make_paper_model(ModelId::A1, rotation);
    }
    throw std::logic_error("unreachable");
}

NullCalibration calibrate_null(const NullSpec& spec, int reps, std::uint64_t seed, int workers) {
    if (reps < 100) throw std::invalid_argument("calibrate_null: need at least 100 replicates");

    auto tri = build_scheme_triangulation(spec.scheme);
    std::vector<double> values(reps, kNaN);

    parallel_for(reps, workers, [&](int rep) {
        // One rotation per replicate marginalizes grid-alignment effects;
        // zero-noise runs keep a single rotation so replicates are
        // identical and the calibration is exactly degenerate.
        std::mt19937_64 rot_rng(derive_seed(seed, spec.sigma > 0.0 ? 2 * rep : 0));
        const Mat3 rot = uniform_rotation(rot_rng);
        const DiffusionModel model = null_model_for(spec.stat, spec.c, rot);
        const HardiSample sample =
            acquire(model, spec.scheme, spec.sigma, derive_seed(seed, 2 * rep + 1));
        const NormalizedDiffusion nd = normalize(sample, tri);
        DominantOptions opts;
        opts.frt_L = spec.frt_L;
        const DominantEstimate est = dominant_direction(nd, opts);
        const CircleGrid grid = fill_grid(nd, est, spec.grid_n);
        const auto [abar, sigma_a] = estimate_sigma_circle(grid, spec.rho, spec.mad);
        const double sigma2 = std::min(sigma_a, nd.sigma_star);

        double v = kNaN;
        switch (spec.stat) {
        case StatTag::U:
            v = test_U(grid, abar, sigma_a, kInf).U;
            break;
        case StatTag::Utilde:
            v = test_U_tilde(grid, sigma_a, spec.c, kInf).U_tilde;
            break;
        case StatTag::Q:
            v = test_Q(grid, sigma2, spec.rho, -kInf).Q;
            break;
        case StatTag::V:
            v = test_V(grid, sigma2, spec.m, spec.m_prime, kInf).V;
            break;
        case StatTag::K:
            v = test_K(grid, 0.0, 1.0).K;
            break;
        }
        values[rep] = v;
    });

    // NaN marks an undefined replicate (dropped); infinities are genuine
    // degenerate values (zero-noise runs) and stay as extreme order
    // statistics.
    std::vector<double> clean;
    clean.reserve(values.size());
    for (double v : values) {
        if (!std::isnan(v)) clean.push_back(v);
    }
    if (clean.size() < static_cast<size_t>(reps) / 2) {
        throw std::runtime_error("calibrate_null: too many undefined replicates");
    }
    std::sort(clean.begin(), clean.end());

    NullCalibration cal;
    cal.stat = spec.stat;
    cal.spec_hash = spec.hash();
    cal.sigma = spec.sigma;
    cal.scheme_n = spec.scheme.n();
    cal.reps = static_cast<int>(clean.size());
    cal.seed = seed;
    double mean = 0.0;
    size_t finite = 0;
    for (double v : clean) {
        if (std::isfinite(v)) {
            mean += v;
            ++finite;
        }
    }
    mean = finite > 0 ? mean / finite : 0.0;
    double ss = 0.0;
    for (double v : clean) {
        if (std::isfinite(v)) ss += (v - mean) * (v - mean);
    }
    cal.mean = mean;
    cal.sd = finite > 1 ? std::sqrt(ss / (finite - 1)) : 0.0;

    static const double levels[] = {0.005, 0.01, 0.025, 0.05, 0.1, 0.25, 0.5,
                                    0.75,  0.9,  0.95,  0.975, 0.99, 0.995};
    const size_t n = clean.size();
    for (double lv : levels) {
        const double pos = lv * (n - 1);
        const size_t lo = static_cast<size_t>(pos);
        const double f = pos - lo;
        double q;
        if (lo + 1 >= n) q = clean[n - 1];
        else if (std::isfinite(clean[lo]) && std::isfinite(clean[lo + 1])) {
            q = clean[lo] + f * (clean[lo + 1] - clean[lo]);
        } else {
            q = f < 0.5 ? clean[lo] : clean[lo + 1];
        }
        cal.quantiles[lv] = q;
    }
    return cal;
}

// --- report + classification ----------------------------------------------

const NullCalibration* CalibrationSet::get(StatTag tag) const {
    switch (tag) {
    case StatTag::U: return u ? &*u : nullptr;
    case StatTag::Utilde: return u_tilde ? &*u_tilde : nullptr;
    case StatTag::Q: return q ? &*q : nullptr;
    case StatTag::V: return v ? &*v : nullptr;
    case StatTag::K: return k ? &*k : nullptr;
    }
    return nullptr;
}

void CalibrationSet::put(NullCalibration cal) {
    switch (cal.stat) {
    case StatTag::U: u = std::move(cal); break;
    case StatTag::Utilde: u_tilde = std::move(cal); break;
    case StatTag::Q: q = std::move(cal); break;
    case StatTag::V: v = std::move(cal); break;
    case StatTag::K: k = std::move(cal); break;
    }
}

std::string voxel_class_name(VoxelClass c) {
    switch (c) {
    case VoxelClass::Isotropic: return "isotropic";
    case VoxelClass::UnimodalProlate: return "unimodal-prolate";
    case VoxelClass::UnimodalScalene: return "unimodal-scalene";
    case VoxelClass::UnimodalAsymmetric: return "unimodal-asymmetric";
    case VoxelClass::Multimodal: return "multimodal";
    case VoxelClass::Undetermined: return "undetermined";
    }
    return "?";
}

TestReport run_all_tests(const CircleGrid& grid, double sigma_star, const CalibrationSet& calibs,
                         const TestParams& params, std::span<const double> frt_values) {
    TestReport rep;
    const auto [abar, sigma_a] = estimate_sigma_circle(grid, params.rho, params.mad);
    rep.abar_N = abar;
    rep.sigma_A = sigma_a;
    rep.sigma_star = sigma_star;
    rep.sigma2 = std::min(sigma_a, sigma_star);
    rep.summary = summaries(grid, frt_values);

    const auto ures = test_U(grid, abar, sigma_a, params.u_threshold);
    rep.T = ures.T;
    rep.U = ures.U;
    rep.thresholds["U"] = params.u_threshold;
    rep.decisions["U"] = ures.decision;
    if (const auto* cal = calibs.get(StatTag::U)) rep.p_values["U"] = cal->p_value(rep.U);

    const auto* cal_ut = calibs.get(StatTag::Utilde);
    const double th_ut = cal_ut ? cal_ut->threshold() : kInf;
    const auto utres = test_U_tilde(grid, sigma_a, params.c, th_ut);
    rep.T_tilde = utres.T_tilde;
    rep.U_tilde = utres.U_tilde;
    rep.thresholds["Ut"] = th_ut;
    rep.decisions["Ut"] = cal_ut ? utres.decision : Decision::Undefined;
    if (cal_ut) rep.p_values["Ut"] = cal_ut->p_value(rep.U_tilde);

    const auto* cal_q = calibs.get(StatTag::Q);
    const double th_q = cal_q ? cal_q->threshold() : -kInf;
    const auto qres = test_Q(grid, rep.sigma2, params.rho, th_q);
    rep.X = qres.X;
    rep.Q = qres.Q;
    rep.X_k = qres.X_k;
    rep.thresholds["Q"] = th_q;
    rep.decisions["Q"] = cal_q ? qres.decision : Decision::Undefined;
    if (cal_q) rep.p_values["Q"] = cal_q->p_value(rep.Q);

    const auto* cal_v = calibs.get(StatTag::V);
    const double th_v = cal_v ? cal_v->threshold() : kInf;
    const auto vres = test_V(grid, rep.sigma2, params.m, params.m_prime, th_v);
    rep.Z = vres.Z;
    rep.V = vres.V;
    rep.k_max = vres.k_max;
    rep.thresholds["V"] = th_v;
    rep.decisions["V"] = cal_v ? vres.decision : Decision::Undefined;
    if (cal_v) rep.p_values["V"] = cal_v->p_value(rep.V);

    const auto* cal_k = calibs.get(StatTag::K);
    const auto kres = cal_k ? test_K(grid, cal_k->mean, cal_k->sd, params.k_level)
                            : test_K(grid, 0.0, 0.0, params.k_level);
    rep.K = kres.K;
    rep.P_k = kres.P_k;
    rep.k_breve_max = kres.k_breve_max;
    rep.decisions["K"] = cal_k ? kres.decision : Decision::Undefined;
    if (cal_k) rep.p_values["K"] = cal_k->p_value(rep.K);

    rep.classification = classify_voxel(rep);
    return rep;
}

VoxelClass classify_voxel(const TestReport& report) {
    auto get = [&](const char* name) {
        const auto it = report.decisions.find(name);
        if (it == report.decisions.end()) {
            throw std::invalid_argument(std::string("classify_voxel: missing decision ") + name);
        }
        return it->second;
    };
    const Decision u = get("U");
    if (u == Decision::Undefined) return VoxelClass::Undetermined;
    if (u == Decision::Fail) {
        const Decision q = get("Q");
        if (q == Decision::Undefined) return VoxelClass::Undetermined;
        return q == Decision::Reject ? VoxelClass::Multimodal : VoxelClass::Isotropic;
    }
    const Decision ut = get("Ut");
    if (ut == Decision::Undefined) return VoxelClass::Undetermined;
    if (ut == Decision::Fail) return VoxelClass::Multimodal;
    const Decision k = get("K");
    const Decision v = get("V");
    if (k == Decision::Undefined || v == Decision::Undefined) return VoxelClass::Undetermined;
    if (k == Decision::Reject) return VoxelClass::UnimodalAsymmetric;
    if (v == Decision::Reject) return VoxelClass::UnimodalScalene;
    return VoxelClass::UnimodalProlate;
}

} // namespace qhardi
