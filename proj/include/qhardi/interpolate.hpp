#pragma once

// Spherical triangulation of a full-sphere point set (convex hull) with
// barycentric-linear interpolation inside each spherical triangle. Queries
// are sign-canonicalized so that f(q) = f(-q) holds bitwise on antipodally
// augmented data.

#include <array>
#include <memory>
#include <span>
#include <vector>

#include "qhardi/geometry.hpp"

namespace qhardi {

class SphericalTriangulation {
public:
    /// Points must cover the sphere (the hull must contain the origin);
    /// otherwise the structure degrades to inverse-geodesic-distance
    /// weighting and flags fallback_mode().
    explicit SphericalTriangulation(const std::vector<Direction>& points);

    struct Location {
        std::array<int, 3> vertices{-1, -1, -1};
        std::array<double, 3> weights{};
        int exact_vertex = -1; // >= 0 when the query coincides with a node
    };

    /// Locate the canonical representative of q on the triangulated sphere.
    Location locate(const Vec3& q) const;

    /// Linear interpolation of per-point values at q. values.size() must
    /// equal the number of input points.
    double interpolate(std::span<const double> values, const Vec3& q) const;

    bool fallback_mode() const { return fallback_; }
    size_t facet_count() const { return facets_.size() / 3; }
    size_t point_count() const { return points_.size(); }
    /// Input points that did not become hull vertices (coincident inputs).
    int dropped_points() const { return dropped_; }

private:
    std::vector<Vec3> points_;
    std::vector<int> facets_;        // 3 vertex ids per facet
    std::vector<int> neighbors_;     // neighbor facet across edge opposite vertex i
    std::vector<Vec3> normals_;      // outward unit normals
    std::vector<double> offsets_;    // plane offsets, normal . x = offset
    std::vector<int> bin_facet_;     // lat-lon directory into facets
    int bin_rows_ = 0, bin_cols_ = 0;
    bool fallback_ = false;
    int dropped_ = 0;

    void build_hull();
    void build_directory();
    int start_facet(const Vec3& q) const;
    bool barycentric(int facet, const Vec3& q, std::array<double, 3>& w) const;
    double fallback_value(std::span<const double> values, const Vec3& q) const;
};

} // namespace qhardi
