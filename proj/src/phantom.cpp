#include "qhardi/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace qhardi {

namespace {

double quadratic_form(const EllipsoidModel& m, const Vec3& q) {
    const double p1 = m.frame.u1.vec().dot(q);
    const double p2 = m.frame.u2.vec().dot(q);
    const double p3 = m.frame.u3.vec().dot(q);
    return m.lambdas[0] * p1 * p1 + m.lambdas[1] * p2 * p2 + m.lambdas[2] * p3 * p3;
}

Frame frame_with_main_axis(const Vec3& main, const Vec3& second) {
    const Vec3 u1 = main.normalized();
    const Vec3 u2 = (second - u1 * u1.dot(second)).normalized();
    const Vec3 u3 = u1.cross(u2);
    return Frame(dir_unchecked(u1), dir_unchecked(u2), Direction::normalize(u3));
}

} // namespace

double eval_model(const EllipsoidModel& m, const Vec3& q) {
    const double s = quadratic_form(m, q);
    if (m.kernel == Kernel::RawExponent) return std::exp(-m.t * s);
    const double pi = std::numbers::pi;
    return std::exp(-2.0 * pi * pi * s); // B(r) = exp(-2 (pi r)^2) at r = sqrt(s)
}

double eval_model(const MixtureModel& m, const Vec3& q) {
    double v = 0.0;
    for (const auto& [w, comp] : m.components) v += w * eval_model(comp, q);
    return v;
}

double eval_model(const AsymmetricModel& m, const Vec3& q) {
    const double t = m.t;
    const double p1 = m.frame.u1.vec().dot(q);
    const double p2 = m.frame.u2.vec().dot(q);
    const double p3 = m.frame.u3.vec().dot(q);
    const double bracket =
        std::exp(-68.0 * t * p1 * p1) *
            (std::exp(-0.2 * t * p3 * p3) + std::exp(-35.0 * t * p3 * p3)) +
        (4.0 / std::numbers::pi) * dawson(std::sqrt(68.0 * t) * p1) *
            (dawson(std::sqrt(35.0 * t) * p3) - dawson(std::sqrt(0.2 * t) * p3));
    return std::exp(-11.0 * t * p2 * p2) * std::abs(bracket);
}

double eval_model(const DiffusionModel& model, const Vec3& q) {
    return std::visit([&](const auto& m) { return eval_model(m, q); }, model);
}

double dawson(double x) {
    const double ax = std::abs(x);
    if (ax < 1.0) {
        // D' = 1 - 2xD: a_n = (-2)^n / (2n+1)!!
        double term = x, sum = x;
        for (int n = 1; n < 40; ++n) {
            term *= -2.0 * x * x / (2.0 * n + 1.0);
            sum += term;
            if (std::abs(term) < 1e-18 * std::abs(sum) + 1e-300) break;
        }
        return sum;
    }
    // Rybicki's exponentially convergent sampling: D(x) ~ (1/sqrt(pi)) *
    // sum over odd n of exp(-(x - n h)^2) / n, error ~ exp(-pi^2/(4h^2)).
    const double h = 0.25;
    const int n0 = 2 * static_cast<int>(std::lround(0.5 * ax / h)); // nearest even
    const double xp = ax - n0 * h;
    double sum = 0.0;
    const int terms = 32; // covers exp(-(6.8)^2) cutoff at h = 0.25
    for (int i = -terms + 1; i <= terms; ++i) {
        const int n = 2 * i - 1; // odd offsets around n0
        const double d = xp - n * h;
        sum += std::exp(-d * d) / (n0 + n);
    }
    const double val = sum / std::sqrt(std::numbers::pi);
    return x >= 0.0 ? val : -val;
}

DiffusionModel make_paper_model(ModelId id, const Mat3& rotation) {
    const Frame rot = rotate_frame(Frame::canonical(), rotation);
    switch (id) {
    case ModelId::A1:
        return EllipsoidModel{{68.0, 8.0, 8.0}, rot};
    case ModelId::A2:
        return EllipsoidModel{{68.0, 15.0, 1.0}, rot};
    case ModelId::A3:
        return EllipsoidModel{{28.0, 28.0, 28.0}, rot};
    case ModelId::A4: {
        MixtureModel m;
        m.components.push_back({0.5, EllipsoidModel{{68.0, 8.0, 8.0}, rot}});
        // Second tensor: main axis on rotated e2, minor axes (8, 8).
        const Frame swapped = frame_with_main_axis(rot.u2.vec(), rot.u3.vec());
        m.components.push_back({0.5, EllipsoidModel{{68.0, 8.0, 8.0}, swapped}});
        return m;
    }
    case ModelId::A5:
        return AsymmetricModel{0.04, rot};
    case ModelId::A6: {
        // The experiment rotation is not applied here; the second basis is
        // a fixed oblique rotation of the lab axes (60 degrees about e2),
        // which gives the mixture its asymmetric two-tensor character.
        MixtureModel m;
        m.components.push_back({0.3, EllipsoidModel{{68.0, 8.0, 8.0}, Frame::canonical()}});
        const Mat3 breve = Mat3::rotation_about({0, 1, 0}, std::numbers::pi / 3.0);
        m.components.push_back(
            {0.7, EllipsoidModel{{42.5, 14.0, 20.0}, rotate_frame(Frame::canonical(), breve)}});
        return m;
    }
    }
    throw std::invalid_argument("unknown model id");
}

std::string model_name(ModelId id) {
    switch (id) {
    case ModelId::A1: return "A1";
    case ModelId::A2: return "A2";
    case ModelId::A3: return "A3";
    case ModelId::A4: return "A4";
    case ModelId::A5: return "A5";
    case ModelId::A6: return "A6";
    }
    return "?";
}

ModelId model_from_name(const std::string& name) {
    for (ModelId id : {ModelId::A1, ModelId::A2, ModelId::A3, ModelId::A4, ModelId::A5, ModelId::A6}) {
        if (model_name(id) == name) return id;
    }
    throw std::invalid_argument("unknown model name: " + name);
}

MixtureModel fiber_evolution(FiberKind kind, double t, const std::array<double, 3>& ev) {
    if (!(t >= 0.0 && t <= 1.0)) {
        throw std::domain_error("fiber_evolution: t must lie in [0, 1]");
    }
    double a1 = 1.0;
    Vec3 dir2{0, 1, 0};
    if (kind == FiberKind::Forking) {
        a1 = 1.0 - t / 2.0;
        dir2 = {std::cos(std::numbers::pi * t / 2.0), std::sin(std::numbers::pi * t / 2.0), 0.0};
    } else {
        // Piecewise-linear weight through {1, 1, 0.75, 0.5, 0.75, 1} at
        // t = 0, .2, .4, .6, .8, 1; directions fixed at 90 degrees.
        static const double knots_t[] = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
        static const double knots_a[] = {1.0, 1.0, 0.75, 0.5, 0.75, 1.0};
        int seg = 0;
        while (seg < 4 && t > knots_t[seg + 1]) ++seg;
        const double f = (t - knots_t[seg]) / (knots_t[seg + 1] - knots_t[seg]);
        a1 = knots_a[seg] + f * (knots_a[seg + 1] - knots_a[seg]);
    }
    MixtureModel m;
    EllipsoidModel comp1{ev, Frame::canonical()};
    if (a1 >= 1.0) {
        m.components.push_back({1.0, comp1});
        return m;
    }
    m.components.push_back({a1, comp1});
    const Frame f2 = frame_with_main_axis(dir2, Vec3{0, 0, 1}.cross(dir2));
    m.components.push_back({1.0 - a1, EllipsoidModel{ev, f2}});
    return m;
}

std::array<double, 2> noisy_channels(double amplitude, double sigma_abs, std::mt19937_64& rng) {
    if (sigma_abs == 0.0) return {amplitude, 0.0};
    std::normal_distribution<double> gauss(0.0, sigma_abs);
    const double re = amplitude + gauss(rng);
    const double im = gauss(rng);
    return {re, im};
}

HardiSample acquire(const DiffusionModel& model, const AcquisitionScheme& scheme,
                    double noise_sigma, std::uint64_t seed) {
    if (noise_sigma < 0.0) throw std::domain_error("acquire: negative noise sigma");
    if (scheme.n() < 6 || scheme.n0 < 1) {
        throw std::invalid_argument("acquire: scheme needs n >= 6 directions and n0 >= 1");
    }
    const double a0 = eval_model(model, Vec3{0, 0, 0});
    const double sigma_abs = noise_sigma * a0;
    std::mt19937_64 rng(derive_seed(seed, 0x9e1d));

    HardiSample s;
    s.scheme = scheme;
    s.noise_sigma = noise_sigma;
    s.raw_values.reserve(scheme.directions.size());
    for (const Direction& d : scheme.directions) {
        const auto [re, im] = noisy_channels(eval_model(model, d.vec()), sigma_abs, rng);
        s.raw_values.push_back(std::hypot(re, im));
    }
    s.b0_values.reserve(scheme.n0);
    for (int k = 0; k < scheme.n0; ++k) {
        const auto [re, im] = noisy_channels(a0, sigma_abs, rng);
        s.b0_values.push_back(std::hypot(re, im));
    }
    return s;
}

AcquisitionScheme electrostatic_scheme(int n, int n0) {
    if (n < 6) throw std::invalid_argument("electrostatic_scheme: need n >= 6");
    if (n0 < 1) throw std::invalid_argument("electrostatic_scheme: need n0 >= 1");

    // Fibonacci spiral start over the upper hemisphere, then gradient
    // descent on the antipodally symmetrized Coulomb energy.
    std::vector<Vec3> pts(n);
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
        const double z = 1.0 - (i + 0.5) / n; // z in (0, 1): one per pair
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double th = golden * i + 0.1;
        pts[i] = Vec3{r * std::cos(th), r * std::sin(th), z}.normalized();
    }

    std::vector<Vec3> force(n);
    const int iters = 1200;
    for (int it = 0; it < iters; ++it) {
        for (auto& f : force) f = {0, 0, 0};
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                const Vec3 d1 = pts[i] - pts[j];
                const Vec3 d2 = pts[i] + pts[j];
                const double r1 = std::max(d1.norm(), 1e-9);
                const double r2 = std::max(d2.norm(), 1e-9);
                const Vec3 f1 = d1 * (1.0 / (r1 * r1 * r1));
                const Vec3 f2 = d2 * (1.0 / (r2 * r2 * r2));
                force[i] = force[i] + f1 + f2;
                force[j] = force[j] - f1 + f2;
            }
        }
        const double step = 0.3 / n * (1.0 - 0.7 * it / iters);
        for (int i = 0; i < n; ++i) {
            const Vec3 tangent = force[i] - pts[i] * pts[i].dot(force[i]);
            pts[i] = (pts[i] + tangent * step).normalized();
        }
    }

    AcquisitionScheme scheme;
    scheme.n0 = n0;
    scheme.directions.reserve(n);
    for (const auto& p : pts) scheme.directions.push_back(Direction::normalize(canonical_sign(p)));
    return scheme;
}

double min_antipodal_angle(const AcquisitionScheme& scheme) {
    double best = std::numbers::pi;
    const auto& dirs = scheme.directions;
    for (size_t i = 0; i < dirs.size(); ++i) {
        for (size_t j = i + 1; j < dirs.size(); ++j) {
            const double c = std::min(1.0, std::abs(dirs[i].dot(dirs[j])));
            best = std::min(best, std::acos(c));
        }
    }
    return best;
}

AcquisitionScheme dense_scheme(int level) {
    AcquisitionScheme scheme;
    scheme.n0 = 1;
    for (const Direction& d : icosphere_vertices(level)) {
        const Vec3 c = canonical_sign(d.vec());
        bool dup = false;
        for (const Direction& kept : scheme.directions) {
            if ((kept.vec() - c).norm() < 1e-9) { dup = true; break; }
        }
        if (!dup) scheme.directions.push_back(Direction::normalize(c));
    }
    return scheme;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

Mat3 uniform_rotation(std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    double w = gauss(rng), x = gauss(rng), y = gauss(rng), z = gauss(rng);
    const double nrm = std::sqrt(w * w + x * x + y * y + z * z);
    w /= nrm; x /= nrm; y /= nrm; z /= nrm;
    Mat3 r;
    r.m = {1 - 2 * (y * y + z * z), 2 * (x * y - w * z),     2 * (x * z + w * y),
           2 * (x * y + w * z),     1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
           2 * (x * z - w * y),     2 * (y * z + w * x),     1 - 2 * (x * x + y * y)};
    return r;
}

} // namespace qhardi
