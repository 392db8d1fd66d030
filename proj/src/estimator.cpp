#include "qhardi/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace qhardi {

std::shared_ptr<const SphericalTriangulation>
build_scheme_triangulation(const AcquisitionScheme& scheme) {
    std::vector<Direction> aug;
    aug.reserve(scheme.directions.size() * 2);
    for (const auto& d : scheme.directions) aug.push_back(d);
    for (const auto& d : scheme.directions) aug.push_back(-d);
    return std::make_shared<SphericalTriangulation>(aug);
}

NormalizedDiffusion normalize(const HardiSample& sample,
                              std::shared_ptr<const SphericalTriangulation> shared) {
    if (sample.scheme.n0 < 1 || sample.b0_values.empty()) {
        throw std::invalid_argument("normalize: sample has no b=0 measurements");
    }
    double abar0 = 0.0;
    for (double v : sample.b0_values) abar0 += v;
    abar0 /= sample.b0_values.size();
    if (!(abar0 > 0.0)) throw std::runtime_error("normalize: nonpositive b=0 mean");

    const size_t n = sample.raw_values.size();
    if (n != sample.scheme.directions.size()) {
        throw std::invalid_argument("normalize: value count does not match scheme");
    }
    if (2 * n < 12) throw std::invalid_argument("normalize: need at least 6 directions");

    NormalizedDiffusion nd;
    nd.abar0 = abar0;
    nd.points.reserve(2 * n);
    nd.values.reserve(2 * n);
    for (size_t i = 0; i < n; ++i) nd.points.push_back(sample.scheme.directions[i]);
    for (size_t i = 0; i < n; ++i) nd.points.push_back(-sample.scheme.directions[i]);
    for (size_t i = 0; i < n; ++i) nd.values.push_back(sample.raw_values[i] / abar0);
    for (size_t i = 0; i < n; ++i) nd.values.push_back(nd.values[i]);

    const SigmaStarEstimate ss = estimate_sigma_star(sample);
    nd.sigma_star = ss.value;
    nd.sigma_star_fallback = ss.fallback;

    nd.triangulation = shared ? std::move(shared) : build_scheme_triangulation(sample.scheme);
    return nd;
}

double interpolate(const NormalizedDiffusion& nd, const Direction& q) {
    return nd.triangulation->interpolate(nd.values, q.vec());
}

double frt(const NormalizedDiffusion& nd, const Direction& x, int L) {
    if (L < 16) throw std::invalid_argument("frt: need at least 16 quadrature nodes");
    const Vec3 axis = canonical_sign(x.vec());
    const auto [e1, e2] = perp_basis(axis);
    double sum = 0.0;
    const double step = 2.0 * std::numbers::pi / L;
    for (int l = 0; l < L; ++l) {
        const double c = std::cos(l * step), s = std::sin(l * step);
        sum += nd.triangulation->interpolate(nd.values, e1 * c + e2 * s);
    }
    return sum / L;
}

namespace {

Vec3 argmax_frt(const NormalizedDiffusion& nd, const std::vector<Vec3>& candidates, int L,
                std::vector<double>* record) {
    double best = -std::numeric_limits<double>::infinity();
    Vec3 winner = candidates.front();
    for (const Vec3& c : candidates) {
        const double v = frt(nd, dir_unchecked(c.normalized()), L);
        if (record) record->push_back(v);
        if (v > best) {
            best = v;
            winner = c;
        }
    }
    return winner.normalized();
}

/// Least-squares quadratic peak of the FRT surface on a tangent grid around
/// `center`. Fitting the paraboloid averages out the interpolation-induced
/// wiggle that throws a plain discrete arg-max off by several degrees.
Vec3 quadratic_frt_peak(const NormalizedDiffusion& nd, const Vec3& center, double span_rad,
                        int half, int L, int* evaluated) {
    const auto [t1, t2] = perp_basis(center);
    double ata[6][6] = {};
    double aty[6] = {};
    for (int i = -half; i <= half; ++i) {
        for (int j = -half; j <= half; ++j) {
            const double a = span_rad * i / half, b = span_rad * j / half;
            const Vec3 p = (center + t1 * a + t2 * b).normalized();
            const double y = frt(nd, dir_unchecked(p), L);
            const double row[6] = {1, a, b, a * a, a * b, b * b};
            for (int r = 0; r < 6; ++r) {
                for (int c = 0; c < 6; ++c) ata[r][c] += row[r] * row[c];
                aty[r] += row[r] * y;
            }
        }
    }
    if (evaluated) *evaluated += (2 * half + 1) * (2 * half + 1);
    double m[6][7];
    for (int r = 0; r < 6; ++r) {
        for (int c = 0; c < 6; ++c) m[r][c] = ata[r][c];
        m[r][6] = aty[r];
    }
    for (int col = 0; col < 6; ++col) {
        int piv = col;
        for (int r = col + 1; r < 6; ++r) {
            if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
        }
        for (int c = 0; c < 7; ++c) std::swap(m[piv][c], m[col][c]);
        if (m[col][col] == 0.0) return center;
        for (int r = 0; r < 6; ++r) {
            if (r == col) continue;
            const double f = m[r][col] / m[col][col];
            for (int c = col; c < 7; ++c) m[r][c] -= f * m[col][c];
        }
    }
    double coef[6];
    for (int r = 0; r < 6; ++r) coef[r] = m[r][6] / m[r][r];
    const double h11 = 2 * coef[3], h12 = coef[4], h22 = 2 * coef[5];
    const double det = h11 * h22 - h12 * h12;
    if (det <= 0.0 || h11 >= 0.0) return center; // no interior maximum
    double a = (-coef[1] * h22 + coef[2] * h12) / det;
    double b = (-coef[2] * h11 + coef[1] * h12) / det;
    const double r = std::hypot(a, b);
    if (r > span_rad) {
        a *= span_rad / r;
        b *= span_rad / r;
    }
    return (center + t1 * a + t2 * b).normalized();
}

} // namespace

DominantEstimate dominant_direction(const NormalizedDiffusion& nd, const DominantOptions& opts) {
    DominantEstimate est{Frame::canonical(), {}, 0};

    // Stage 1: the augmented sample directions.
    std::vector<Vec3> coarse;
    coarse.reserve(nd.points.size());
    for (const auto& p : nd.points) coarse.push_back(p.vec());
    est.frt_values.reserve(coarse.size());
    Vec3 winner = argmax_frt(nd, coarse, opts.frt_L, &est.frt_values);
    est.candidate_count = static_cast<int>(coarse.size());

    if (opts.refine) {
        // Stage 2: icosphere vertices within a 10-degree cap of the winner.
        static const std::vector<Direction> refine_set = icosphere_vertices(4);
        std::vector<Vec3> cap;
        const double cos_cap = std::cos(10.0 * std::numbers::pi / 180.0);
        for (const auto& v : refine_set) {
            if (std::abs(v.vec().dot(winner)) > cos_cap) cap.push_back(canonical_sign(v.vec()));
        }
        if (!cap.empty()) {
            cap.push_back(winner);
            winner = argmax_frt(nd, cap, opts.frt_L, nullptr);
            est.candidate_count += static_cast<int>(cap.size());
        }
        // Stage 3: quadratic peak fit over a +-12 degree tangent grid.
        winner = quadratic_frt_peak(nd, winner, 12.0 * std::numbers::pi / 180.0, 5,
                                    opts.frt_L, &est.candidate_count);
    }

    const Direction u1 = Direction::normalize(canonical_sign(winner));

    // Minor axes: u2 maximizes the interpolated diffusion on the dominant
    // circle, which maximizes the decay difference between the two axes.
    const auto [c1, c2] = perp_basis(u1.vec());
    double best = -std::numeric_limits<double>::infinity();
    Vec3 u2v = c1;
    for (int i = 0; i < opts.circle_samples; ++i) {
        const double ang = 2.0 * std::numbers::pi * i / opts.circle_samples;
        const Vec3 p = c1 * std::cos(ang) + c2 * std::sin(ang);
        const double v = nd.triangulation->interpolate(nd.values, p);
        if (v > best) {
            best = v;
            u2v = p;
        }
    }
    const Direction u2 = Direction::normalize(u2v - u1.vec() * u1.vec().dot(u2v));
    const Direction u3 = Direction::normalize(u1.vec().cross(u2.vec()));
    est.frame = Frame(u1, u2, u3);
    return est;
}

CircleGrid fill_grid(const NormalizedDiffusion& nd, const DominantEstimate& est, int n) {
    CircleGrid grid = build_grid(est.frame, n);
    grid.dominant_values.reserve(n);
    for (const auto& p : grid.dominant_points) {
        grid.dominant_values.push_back(interpolate(nd, p));
    }
    grid.perp_values.reserve(grid.perp_points.size());
    for (const auto& p : grid.perp_points) {
        grid.perp_values.push_back(interpolate(nd, p));
    }
    return grid;
}

std::pair<double, double> estimate_sigma_circle(const CircleGrid& grid, double rho, MadKind kind) {
    if (!grid.filled()) throw std::invalid_argument("estimate_sigma_circle: grid not filled");
    if (!(rho > 0.0 && rho <= 3.0)) {
        throw std::invalid_argument("estimate_sigma_circle: rho must lie in (0, 3]");
    }
    double mean = 0.0;
    for (double v : grid.dominant_values) mean += v;
    mean /= grid.n;
    double mad = 0.0;
    if (kind == MadKind::MaxAbs) {
        for (double v : grid.dominant_values) mad = std::max(mad, std::abs(v - mean));
    } else {
        std::vector<double> dev;
        dev.reserve(grid.n);
        for (double v : grid.dominant_values) dev.push_back(std::abs(v - mean));
        std::nth_element(dev.begin(), dev.begin() + grid.n / 2, dev.end());
        mad = dev[grid.n / 2];
    }
    return {mean, std::sqrt(rho) * mad};
}

SigmaStarEstimate estimate_sigma_star(const HardiSample& sample) {
    double abar0 = 0.0;
    for (double v : sample.b0_values) abar0 += v;
    abar0 /= std::max<size_t>(1, sample.b0_values.size());

    if (sample.b0_values.size() >= 2) {
        double ss = 0.0;
        for (double v : sample.b0_values) ss += (v - abar0) * (v - abar0);
        const double sd = std::sqrt(ss / (sample.b0_values.size() - 1));
        return {sd / abar0, false};
    }
    if (sample.noise_sigma >= 0.0) {
        // Simulator-provided channel sigma, already in units of A(0).
        return {sample.noise_sigma, false};
    }
    // Fallback: half the mean-square nearest-neighbor difference.
    const auto& dirs = sample.scheme.directions;
    double acc = 0.0;
    int count = 0;
    for (size_t i = 0; i < dirs.size(); ++i) {
        double bestc = -2.0;
        size_t nn = i;
        for (size_t j = 0; j < dirs.size(); ++j) {
            if (j == i) continue;
            const double c = std::abs(dirs[i].dot(dirs[j]));
            if (c > bestc) { bestc = c; nn = j; }
        }
        const double d = (sample.raw_values[i] - sample.raw_values[nn]) / abar0;
        acc += d * d;
        ++count;
    }
    return {std::sqrt(acc / (2.0 * std::max(count, 1))), true};
}

CircleGrid grid_from_model(const DiffusionModel& model, const Frame& frame, int n,
                           double normalizer) {
    const double a0 = normalizer > 0.0 ? normalizer : eval_model(model, Vec3{0, 0, 0});
    CircleGrid grid = build_grid(frame, n);
    grid.dominant_values.reserve(n);
    for (const auto& p : grid.dominant_points) {
        grid.dominant_values.push_back(eval_model(model, p.vec()) / a0);
    }
    grid.perp_values.reserve(grid.perp_points.size());
    for (const auto& p : grid.perp_points) {
        grid.perp_values.push_back(eval_model(model, p.vec()) / a0);
    }
    return grid;
}

} // namespace qhardi
