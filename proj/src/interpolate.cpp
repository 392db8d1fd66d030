#include "qhardi/interpolate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <unordered_map>

namespace qhardi {

namespace {
constexpr double kVisibleEps = 1e-11;
constexpr double kInsideEps = -1e-12;
constexpr double kVertexSnap = 1e-13;

std::uint64_t edge_key(int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}
} // namespace

SphericalTriangulation::SphericalTriangulation(const std::vector<Direction>& points) {
    points_.reserve(points.size());
    for (const auto& p : points) points_.push_back(p.vec());
    if (points_.size() < 4) {
        fallback_ = true;
        return;
    }
    build_hull();
    if (!fallback_) build_directory();
}

void SphericalTriangulation::build_hull() {
    const int n = static_cast<int>(points_.size());

    // Initial tetrahedron: spread four points as far as possible.
    int i0 = 0;
    int i1 = -1;
    double best = -1.0;
    for (int i = 1; i < n; ++i) {
        const double d = (points_[i] - points_[i0]).norm();
        if (d > best) { best = d; i1 = i; }
    }
    int i2 = -1;
    best = -1.0;
    for (int i = 0; i < n; ++i) {
        if (i == i0 || i == i1) continue;
        const double a = (points_[i1] - points_[i0]).cross(points_[i] - points_[i0]).norm();
        if (a > best) { best = a; i2 = i; }
    }
    int i3 = -1;
    best = -1.0;
    const Vec3 nrm0 = (points_[i1] - points_[i0]).cross(points_[i2] - points_[i0]);
    for (int i = 0; i < n; ++i) {
        if (i == i0 || i == i1 || i == i2) continue;
        const double v = std::abs(nrm0.dot(points_[i] - points_[i0]));
        if (v > best) { best = v; i3 = i; }
    }
    if (i1 < 0 || i2 < 0 || i3 < 0 || best < 1e-9) {
        fallback_ = true; // all points (near-)coplanar
        return;
    }

    const Vec3 interior =
        (points_[i0] + points_[i1] + points_[i2] + points_[i3]) * 0.25;

    struct Facet {
        std::array<int, 3> v;
        Vec3 normal;
        double offset;
        bool alive = true;
    };
    std::vector<Facet> facets;
    std::unordered_map<std::uint64_t, std::pair<int, int>> edges; // edge -> two facets

    auto add_facet = [&](int a, int b, int c) {
        Vec3 nrm = (points_[b] - points_[a]).cross(points_[c] - points_[a]);
        double off = nrm.dot(points_[a]);
        if (nrm.dot(interior) > off) { // make normal point away from interior
            std::swap(b, c);
            nrm = -nrm;
            off = nrm.dot(points_[a]);
        }
        const double len = nrm.norm();
        Facet f{{a, b, c}, nrm * (1.0 / len), off / len, true};
        facets.push_back(f);
        const int id = static_cast<int>(facets.size()) - 1;
        for (int e = 0; e < 3; ++e) {
            auto key = edge_key(f.v[e], f.v[(e + 1) % 3]);
            auto it = edges.find(key);
            if (it == edges.end()) edges.emplace(key, std::make_pair(id, -1));
            else it->second.second = id;
        }
        return id;
    };
    auto remove_facet = [&](int id) {
        facets[id].alive = false;
        for (int e = 0; e < 3; ++e) {
            auto key = edge_key(facets[id].v[e], facets[id].v[(e + 1) % 3]);
            auto it = edges.find(key);
            if (it == edges.end()) continue;
            if (it->second.first == id) it->second.first = it->second.second;
            it->second.second = -1;
            if (it->second.first < 0) edges.erase(it);
        }
    };

    add_facet(i0, i1, i2);
    add_facet(i0, i1, i3);
    add_facet(i0, i2, i3);
    add_facet(i1, i2, i3);

    std::vector<char> in_tetra(n, 0);
    in_tetra[i0] = in_tetra[i1] = in_tetra[i2] = in_tetra[i3] = 1;

    for (int p = 0; p < n; ++p) {
        if (in_tetra[p]) continue;
        const Vec3& q = points_[p];
        std::vector<int> visible;
        for (int f = 0; f < static_cast<int>(facets.size()); ++f) {
            if (!facets[f].alive) continue;
            if (facets[f].normal.dot(q) - facets[f].offset > kVisibleEps) visible.push_back(f);
        }
        if (visible.empty()) {
            // Coincident with an existing vertex (sphere points are never
            // strictly interior); drop it.
            ++dropped_;
            continue;
        }
        // Horizon: edges of visible facets whose twin facet is hidden.
        std::vector<std::pair<int, int>> horizon;
        std::vector<char> is_visible(facets.size(), 0);
        for (int f : visible) is_visible[f] = 1;
        for (int f : visible) {
            for (int e = 0; e < 3; ++e) {
                const int a = facets[f].v[e], b = facets[f].v[(e + 1) % 3];
                const auto it = edges.find(edge_key(a, b));
                int twin = -1;
                if (it != edges.end()) {
                    twin = (it->second.first == f) ? it->second.second : it->second.first;
                }
                if (twin < 0 || !is_visible[twin]) horizon.emplace_back(a, b);
            }
        }
        for (int f : visible) remove_facet(f);
        for (const auto& [a, b] : horizon) add_facet(a, b, p);
    }

    // Compact alive facets and verify the hull wraps the origin so that
    // radial point location is well defined.
    std::vector<int> remap(facets.size(), -1);
    for (int f = 0; f < static_cast<int>(facets.size()); ++f) {
        if (!facets[f].alive) continue;
        remap[f] = static_cast<int>(facets_.size() / 3);
        facets_.insert(facets_.end(), facets[f].v.begin(), facets[f].v.end());
        normals_.push_back(facets[f].normal);
        offsets_.push_back(facets[f].offset);
        if (facets[f].offset <= 1e-9) fallback_ = true;
    }
    if (fallback_) {
        facets_.clear();
        normals_.clear();
        offsets_.clear();
        return;
    }

    // Neighbor across the edge opposite each vertex.
    neighbors_.assign(facets_.size(), -1);
    std::unordered_map<std::uint64_t, std::pair<int, int>> facet_of_edge;
    const int nf = static_cast<int>(facets_.size() / 3);
    for (int f = 0; f < nf; ++f) {
        for (int e = 0; e < 3; ++e) {
            auto key = edge_key(facets_[f * 3 + e], facets_[f * 3 + (e + 1) % 3]);
            auto it = facet_of_edge.find(key);
            if (it == facet_of_edge.end()) facet_of_edge.emplace(key, std::make_pair(f, -1));
            else it->second.second = f;
        }
    }
    for (int f = 0; f < nf; ++f) {
        for (int i = 0; i < 3; ++i) {
            const int a = facets_[f * 3 + (i + 1) % 3];
            const int b = facets_[f * 3 + (i + 2) % 3];
            const auto& pr = facet_of_edge.at(edge_key(a, b));
            neighbors_[f * 3 + i] = (pr.first == f) ? pr.second : pr.first;
        }
    }
}

void SphericalTriangulation::build_directory() {
    // Lat-lon bins holding one covering facet each; queries start the
    // facet walk from their bin.
    const int nf = static_cast<int>(facets_.size() / 3);
    bin_rows_ = 32;
    bin_cols_ = 64;
    bin_facet_.assign(static_cast<size_t>(bin_rows_) * bin_cols_, 0);
    for (int r = 0; r < bin_rows_; ++r) {
        const double theta = std::numbers::pi * (r + 0.5) / bin_rows_;
        for (int c = 0; c < bin_cols_; ++c) {
            const double phi = 2.0 * std::numbers::pi * (c + 0.5) / bin_cols_;
            const Vec3 q{std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi),
                         std::cos(theta)};
            int bestf = 0;
            double bestv = -std::numeric_limits<double>::infinity();
            for (int f = 0; f < nf; ++f) {
                // Radial projection: the covering facet maximizes the ray
                // scale offset/(normal.q) among facets in front of q.
                const double dn = normals_[f].dot(q);
                if (dn <= 1e-12) continue;
                std::array<double, 3> w;
                if (barycentric(f, q, w)) { bestf = f; break; }
                const double score = std::min({w[0], w[1], w[2]});
                if (score > bestv) { bestv = score; bestf = f; }
            }
            bin_facet_[static_cast<size_t>(r) * bin_cols_ + c] = bestf;
        }
    }
}

int SphericalTriangulation::start_facet(const Vec3& q) const {
    const double theta = std::acos(std::clamp(q.z, -1.0, 1.0));
    double phi = std::atan2(q.y, q.x);
    if (phi < 0) phi += 2.0 * std::numbers::pi;
    int r = std::min(bin_rows_ - 1, static_cast<int>(theta / std::numbers::pi * bin_rows_));
    int c = std::min(bin_cols_ - 1,
                     static_cast<int>(phi / (2.0 * std::numbers::pi) * bin_cols_));
    return bin_facet_[static_cast<size_t>(r) * bin_cols_ + c];
}

bool SphericalTriangulation::barycentric(int facet, const Vec3& q,
                                         std::array<double, 3>& w) const {
    const Vec3& a = points_[facets_[facet * 3 + 0]];
    const Vec3& b = points_[facets_[facet * 3 + 1]];
    const Vec3& c = points_[facets_[facet * 3 + 2]];
    const double det = a.dot(b.cross(c));
    if (det == 0.0) { w = {0, 0, 0}; return false; }
    w[0] = q.dot(b.cross(c)) / det;
    w[1] = q.dot(c.cross(a)) / det;
    w[2] = q.dot(a.cross(b)) / det;
    return w[0] >= kInsideEps && w[1] >= kInsideEps && w[2] >= kInsideEps;
}

SphericalTriangulation::Location SphericalTriangulation::locate(const Vec3& q_in) const {
    if (fallback_) throw std::logic_error("locate unavailable in fallback mode");
    const Vec3 q = canonical_sign(q_in);
    Location loc;

    int f = start_facet(q);
    std::array<double, 3> w{};
    const int nf = static_cast<int>(facets_.size() / 3);
    bool found = false;
    for (int step = 0; step < 2 * nf; ++step) {
        if (barycentric(f, q, w)) { found = true; break; }
        int worst = 0;
        if (w[1] < w[worst]) worst = 1;
        if (w[2] < w[worst]) worst = 2;
        const int next = neighbors_[f * 3 + worst];
        if (next < 0) break;
        f = next;
    }
    if (!found) {
        // Walk failed (numerically flat corner); scan for the best facet.
        double bestv = -std::numeric_limits<double>::infinity();
        int bestf = 0;
        std::array<double, 3> bw{};
        for (int g = 0; g < nf; ++g) {
            std::array<double, 3> ww{};
            if (barycentric(g, q, ww)) { bestf = g; bw = ww; break; }
            const double score = std::min({ww[0], ww[1], ww[2]});
            if (score > bestv) { bestv = score; bestf = g; bw = ww; }
        }
        f = bestf;
        w = bw;
    }

    for (int i = 0; i < 3; ++i) {
        loc.vertices[i] = facets_[f * 3 + i];
        loc.weights[i] = std::max(0.0, w[i]);
        if ((points_[loc.vertices[i]] - q).norm() < kVertexSnap) loc.exact_vertex = loc.vertices[i];
    }
    return loc;
}

double SphericalTriangulation::interpolate(std::span<const double> values,
                                           const Vec3& q) const {
    if (values.size() != points_.size()) {
        throw std::invalid_argument("interpolate: value count does not match point count");
    }
    if (fallback_) return fallback_value(values, q);
    const Location loc = locate(q);
    if (loc.exact_vertex >= 0) return values[loc.exact_vertex];
    const double wsum = loc.weights[0] + loc.weights[1] + loc.weights[2];
    if (wsum <= 0.0) return fallback_value(values, q);
    // Anchored form: exact for constant data and keeps linear precision.
    const double v0 = values[loc.vertices[0]];
    return v0 + (loc.weights[1] * (values[loc.vertices[1]] - v0) +
                 loc.weights[2] * (values[loc.vertices[2]] - v0)) /
                    wsum;
}

double SphericalTriangulation::fallback_value(std::span<const double> values,
                                              const Vec3& q_in) const {
    const Vec3 q = canonical_sign(q_in);
    // Inverse geodesic distance over the six nearest points.
    const size_t k = std::min<size_t>(6, points_.size());
    std::vector<std::pair<double, int>> dist;
    dist.reserve(points_.size());
    for (int i = 0; i < static_cast<int>(points_.size()); ++i) {
        const double c = std::clamp(points_[i].dot(q), -1.0, 1.0);
        dist.emplace_back(std::acos(c), i);
    }
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    if (dist[0].first < 1e-12) return values[dist[0].second];
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < k; ++i) {
        const double w = 1.0 / dist[i].first;
        num += w * values[dist[i].second];
        den += w;
    }
    return num / den;
}

} // namespace qhardi
