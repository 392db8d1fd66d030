#pragma once

// Spherical geometry for q-space analysis: unit directions, orthonormal
// frames, great-circle parameterizations and the periodic (alpha, beta)
// discretization grids shared by the estimator and statistics layers.

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

namespace qhardi {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator-() const { return {-x, -y, -z}; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec3 normalized() const;
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

/// Unit vector on the q-space shell. Construction checks |v| = 1 to 1e-12;
/// use Direction::normalize to build one from an arbitrary nonzero vector.
class Direction {
public:
    explicit Direction(const Vec3& v);
    static Direction normalize(const Vec3& v);

    const Vec3& vec() const { return v_; }
    double x() const { return v_.x; }
    double y() const { return v_.y; }
    double z() const { return v_.z; }
    Direction operator-() const { return Direction(unchecked_tag{}, -v_); }
    double dot(const Direction& o) const { return v_.dot(o.v_); }

private:
    struct unchecked_tag {};
    Direction(unchecked_tag, const Vec3& v) : v_(v) {}
    Vec3 v_;
    friend Direction dir_unchecked(const Vec3&);
};

/// Internal fast path for vectors already known to be unit length.
Direction dir_unchecked(const Vec3& v);

/// Column-major-free tiny 3x3 matrix; row-major storage m[r*3+c].
struct Mat3 {
    std::array<double, 9> m{};

    static Mat3 identity();
    static Mat3 from_rows(const Vec3& r0, const Vec3& r1, const Vec3& r2);
    static Mat3 rotation_about(const Vec3& axis, double angle);

    Vec3 apply(const Vec3& v) const;
    Mat3 mul(const Mat3& o) const;
    Mat3 transpose() const;
    double det() const;
    /// True when orthogonal with determinant +1 within tol.
    bool is_rotation(double tol = 1e-10) const;
};

/// Right-handed orthonormal frame (u1, u2, u3). u1 carries the dominant
/// spatial direction, u2/u3 span the dominant great circle.
struct Frame {
    Direction u1, u2, u3;

    Frame(const Direction& a, const Direction& b, const Direction& c);
    static Frame canonical();
};

/// Point q(beta) on the great circle perpendicular to frame.u1.
/// beta in [-1,1] runs the u2/+u3 half; |beta| in (1,2] the u2/-u3 half;
/// beta = +-2 both land on -u3, closing the circle.
Direction beta_point(double beta, const Frame& frame);

/// Point on the perpendicular great circle anchored at q(beta): alpha
/// sweeps the circle through u1 and q(beta) with the same two-branch
/// extension as beta_point.
Direction perp_point(double alpha, double beta, const Frame& frame);

/// Rotate every frame axis. The rotation must be proper orthogonal.
Frame rotate_frame(const Frame& frame, const Mat3& rotation);

// Discretization grid.
//
// Internal indices k, j run 0..N-1 with angle 2*pi*i/N; this maps onto the
// published index range -N/4..3N/4-1 by reduction mod N (paper index p
// corresponds to internal (p mod N), and internal i >= 3N/4 reads back as
// i - N). beta_k = cos(2*pi*k/N) with its +-2 branch extensions; identical
// scheme for alpha_j. Consequently:
//   dominant_points[k]   = cos(2*pi*k/N) u2 + sin(2*pi*k/N) u3
//   perp_points[j][k]    = cos(2*pi*j/N) u1 + sin(2*pi*j/N) dominant_points[k]
// alpha = 1 (the pole u1) is j = 0; alpha = 0 (the dominant circle) is
// j = N/4. Cyclic extension in both indices.
struct CircleGrid {
    Frame frame;
    int n = 0;                               // N, divisible by 8
    std::vector<Direction> dominant_points;  // size N
    std::vector<Direction> perp_points;      // size N*N, index j*N + k
    std::vector<double> dominant_values;     // filled by the estimator
    std::vector<double> perp_values;         // j*N + k

    int pole_index() const { return 0; }        // alpha_j = 1
    int equator_index() const { return n / 4; } // alpha_j = 0

    static int wrap(int i, int n) { return ((i % n) + n) % n; }
    int wrap(int i) const { return wrap(i, n); }

    const Direction& perp_point_at(int j, int k) const {
        return perp_points[static_cast<size_t>(wrap(j)) * n + wrap(k)];
    }
    double perp_value_at(int j, int k) const {
        return perp_values[static_cast<size_t>(wrap(j)) * n + wrap(k)];
    }
    double dominant_value_at(int k) const { return dominant_values[wrap(k)]; }

    bool filled() const { return !dominant_values.empty(); }

    /// Discrete average perpendicular diffusion at ring j: mean over k.
    double avg_perp(int j) const;

    int internal_to_paper(int i) const { i = wrap(i); return i < 3 * n / 4 ? i : i - n; }
    int paper_to_internal(int p) const { return wrap(p); }
    double beta_at(int k) const;   // published beta_k for internal index k
    double alpha_at(int j) const;  // published alpha_j for internal index j
};

/// Build the discretization grid for a frame. N must be divisible by 8
/// (required by the quarter- and eighth-period index arithmetic of the
/// test statistics).
CircleGrid build_grid(const Frame& frame, int n);

/// Vertices of a subdivided icosahedron projected to the sphere.
/// Levels 0..4 give 12, 42, 162, 642, 2562 vertices.
std::vector<Direction> icosphere_vertices(int level);

/// Flip v so that its first nonzero component is positive. Gives every
/// antipodal pair one canonical representative, which makes f(q) = f(-q)
/// hold bitwise for everything computed through it.
Vec3 canonical_sign(const Vec3& v);

/// Deterministic orthonormal basis {e1, e2} of the plane perpendicular to x.
std::pair<Vec3, Vec3> perp_basis(const Vec3& x);

} // namespace qhardi
