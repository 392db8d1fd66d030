#include "qhardi/geometry.hpp"

#include <algorithm>
#include <map>
#include <numbers>
#include <stdexcept>

namespace qhardi {

namespace {
constexpr double kUnitTol = 1e-12;
constexpr double kFrameTol = 1e-10;
} // namespace

Vec3 Vec3::normalized() const {
    const double n = norm();
    if (n <= 0.0 || !std::isfinite(n)) {
        throw std::domain_error("cannot normalize zero or non-finite vector");
    }
    return {x / n, y / n, z / n};
}

Direction::Direction(const Vec3& v) : v_(v) {
    if (std::abs(v.norm() - 1.0) > kUnitTol) {
        throw std::domain_error("Direction must be unit length within 1e-12");
    }
}

Direction Direction::normalize(const Vec3& v) { return dir_unchecked(v.normalized()); }

Direction dir_unchecked(const Vec3& v) { return Direction(Direction::unchecked_tag{}, v); }

Mat3 Mat3::identity() {
    Mat3 r;
    r.m = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    return r;
}

Mat3 Mat3::from_rows(const Vec3& r0, const Vec3& r1, const Vec3& r2) {
    Mat3 r;
    r.m = {r0.x, r0.y, r0.z, r1.x, r1.y, r1.z, r2.x, r2.y, r2.z};
    return r;
}

Mat3 Mat3::rotation_about(const Vec3& axis, double angle) {
    const Vec3 a = axis.normalized();
    const double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
    Mat3 r;
    r.m = {t * a.x * a.x + c,       t * a.x * a.y - s * a.z, t * a.x * a.z + s * a.y,
           t * a.x * a.y + s * a.z, t * a.y * a.y + c,       t * a.y * a.z - s * a.x,
           t * a.x * a.z - s * a.y, t * a.y * a.z + s * a.x, t * a.z * a.z + c};
    return r;
}

Vec3 Mat3::apply(const Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
            m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
}

Mat3 Mat3::mul(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k) s += m[i * 3 + k] * o.m[k * 3 + j];
            r.m[i * 3 + j] = s;
        }
    }
    return r;
}

Mat3 Mat3::transpose() const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r.m[i * 3 + j] = m[j * 3 + i];
    return r;
}

double Mat3::det() const {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
}

bool Mat3::is_rotation(double tol) const {
    const Mat3 should_be_id = mul(transpose());
    const Mat3 id = identity();
    for (int i = 0; i < 9; ++i) {
        if (std::abs(should_be_id.m[i] - id.m[i]) > tol) return false;
    }
    return std::abs(det() - 1.0) <= tol;
}

Frame::Frame(const Direction& a, const Direction& b, const Direction& c) : u1(a), u2(b), u3(c) {
    if (std::abs(u1.dot(u2)) > kFrameTol || std::abs(u1.dot(u3)) > kFrameTol ||
        std::abs(u2.dot(u3)) > kFrameTol) {
        throw std::domain_error("Frame axes must be pairwise orthogonal within 1e-10");
    }
    const Vec3 cr = u1.vec().cross(u2.vec());
    if ((cr - u3.vec()).norm() > kFrameTol) {
        throw std::domain_error("Frame must be right-handed: u1 x u2 = u3 within 1e-10");
    }
}

Frame Frame::canonical() {
    return Frame(dir_unchecked({1, 0, 0}), dir_unchecked({0, 1, 0}), dir_unchecked({0, 0, 1}));
}

Direction beta_point(double beta, const Frame& frame) {
    if (!(std::abs(beta) <= 2.0)) {
        throw std::domain_error("beta_point: beta must lie in [-2, 2]");
    }
    double c2, c3;
    if (std::abs(beta) <= 1.0) {
        c2 = beta;
        c3 = std::sqrt(std::max(0.0, 1.0 - beta * beta));
    } else {
        const double r = 2.0 - std::abs(beta);
        c2 = (beta >= 0.0 ? r : -r);
        c3 = -std::sqrt(std::max(0.0, 1.0 - r * r));
    }
    return Direction::normalize(frame.u2.vec() * c2 + frame.u3.vec() * c3);
}

Direction perp_point(double alpha, double beta, const Frame& frame) {
    if (!(std::abs(alpha) <= 2.0)) {
        throw std::domain_error("perp_point: alpha must lie in [-2, 2]");
    }
    const Direction qb = beta_point(beta, frame);
    double c1, cq;
    if (std::abs(alpha) <= 1.0) {
        c1 = alpha;
        cq = std::sqrt(std::max(0.0, 1.0 - alpha * alpha));
    } else {
        const double r = 2.0 - std::abs(alpha);
        c1 = (alpha >= 0.0 ? r : -r);
        cq = -std::sqrt(std::max(0.0, 1.0 - r * r));
    }
    return Direction::normalize(frame.u1.vec() * c1 + qb.vec() * cq);
}

Frame rotate_frame(const Frame& frame, const Mat3& rotation) {
    if (!rotation.is_rotation()) {
        throw std::domain_error("rotate_frame: matrix is not a proper rotation");
    }
    return Frame(Direction::normalize(rotation.apply(frame.u1.vec())),
                 Direction::normalize(rotation.apply(frame.u2.vec())),
                 Direction::normalize(rotation.apply(frame.u3.vec())));
}

double CircleGrid::avg_perp(int j) const {
    const int jj = wrap(j);
    double s = 0.0;
    for (int k = 0; k < n; ++k) s += perp_values[static_cast<size_t>(jj) * n + k];
    return s / n;
}

double CircleGrid::beta_at(int k) const {
    const int p = internal_to_paper(k);
    const double c = std::cos(2.0 * std::numbers::pi * p / n);
    if (p < 0) return 2.0 - c;
    if (p < n / 2) return c;
    return -2.0 - c;
}

double CircleGrid::alpha_at(int j) const { return beta_at(j); }

CircleGrid build_grid(const Frame& frame, int n) {
    if (n <= 0 || n % 8 != 0) {
        throw std::invalid_argument("build_grid: N must be a positive multiple of 8");
    }
    CircleGrid g{frame, n, {}, {}, {}, {}};
    g.dominant_points.reserve(n);
    const double step = 2.0 * std::numbers::pi / n;
    for (int k = 0; k < n; ++k) {
        const double c = std::cos(k * step), s = std::sin(k * step);
        g.dominant_points.push_back(
            Direction::normalize(frame.u2.vec() * c + frame.u3.vec() * s));
    }
    g.perp_points.reserve(static_cast<size_t>(n) * n);
    for (int j = 0; j < n; ++j) {
        const double c = std::cos(j * step), s = std::sin(j * step);
        for (int k = 0; k < n; ++k) {
            g.perp_points.push_back(Direction::normalize(
                frame.u1.vec() * c + g.dominant_points[k].vec() * s));
        }
    }
    return g;
}

std::vector<Direction> icosphere_vertices(int level) {
    if (level < 0 || level > 6) throw std::invalid_argument("icosphere level out of range");
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> verts = {
        {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
        {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
        {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
    for (auto& v : verts) v = v.normalized();
    std::vector<std::array<int, 3>> faces = {
        {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
        {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
        {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};

    for (int l = 0; l < level; ++l) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            verts.push_back((verts[a] + verts[b]).normalized());
            const int idx = static_cast<int>(verts.size()) - 1;
            midpoint.emplace(key, idx);
            return idx;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(faces.size() * 4);
        for (const auto& f : faces) {
            const int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        faces = std::move(next);
    }
    std::vector<Direction> out;
    out.reserve(verts.size());
    for (const auto& v : verts) out.push_back(Direction::normalize(v));
    return out;
}

Vec3 canonical_sign(const Vec3& v) {
    if (v.x != 0.0) return v.x > 0.0 ? v : -v;
    if (v.y != 0.0) return v.y > 0.0 ? v : -v;
    return v.z >= 0.0 ? v : -v;
}

std::pair<Vec3, Vec3> perp_basis(const Vec3& x) {
    const double ax = std::abs(x.x), ay = std::abs(x.y), az = std::abs(x.z);
    Vec3 pick = (ax <= ay && ax <= az) ? Vec3{1, 0, 0} : (ay <= az ? Vec3{0, 1, 0} : Vec3{0, 0, 1});
    const Vec3 e1 = x.cross(pick).normalized();
    const Vec3 e2 = x.cross(e1).normalized();
    return {e1, e2};
}

} // namespace qhardi
