#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <stdexcept>

#include "qhardi/geometry.hpp"
#include "qhardi/phantom.hpp"

using namespace qhardi;

namespace {
bool near(const Vec3& a, const Vec3& b, double tol = 1e-12) { return (a - b).norm() <= tol; }
}

TEST_CASE("beta_point branches") {
    const Frame f = Frame::canonical();
    CHECK(near(beta_point(0.0, f).vec(), {0, 0, 1}));
    CHECK(near(beta_point(1.0, f).vec(), {0, 1, 0}));
    CHECK(near(beta_point(1.5, f).vec(), {0, 0.5, -std::sqrt(0.75)}));
    CHECK(near(beta_point(-1.0, f).vec(), {0, -1, 0}));
    CHECK(near(beta_point(2.0, f).vec(), {0, 0, -1}));
    CHECK(near(beta_point(-2.0, f).vec(), {0, 0, -1}));
    CHECK_THROWS_AS(beta_point(2.5, f), std::domain_error);
}

TEST_CASE("beta_point stays on the dominant circle") {
    std::mt19937_64 rng(7);
    const Mat3 r = uniform_rotation(rng);
    const Frame f = rotate_frame(Frame::canonical(), r);
    for (double beta = -2.0; beta <= 2.0; beta += 0.079) {
        const Direction q = beta_point(beta, f);
        CHECK(std::abs(q.vec().norm() - 1.0) < 1e-10);
        CHECK(std::abs(f.u1.dot(q)) < 1e-10);
    }
    // The circle at beta+2 is the same circle reflected.
    const Direction a = beta_point(-0.63, f);
    const Direction b = beta_point(-0.63 + 2.0, f);
    CHECK(near(a.vec(), -b.vec(), 1e-10));
}

TEST_CASE("perp_point") {
    const Frame f = Frame::canonical();
    CHECK(near(perp_point(0.0, 0.4, f).vec(), beta_point(0.4, f).vec()));
    CHECK(near(perp_point(1.0, -1.3, f).vec(), {1, 0, 0}));
    CHECK(near(perp_point(0.6, 0.0, f).vec(), {0.6, 0, 0.8}));
    CHECK_THROWS_AS(perp_point(-2.01, 0.0, f), std::domain_error);
}

TEST_CASE("rotate_frame") {
    const Frame f = Frame::canonical();
    const Frame same = rotate_frame(f, Mat3::identity());
    CHECK(near(same.u1.vec(), f.u1.vec()));

    const Mat3 quarter = Mat3::rotation_about({0, 0, 1}, std::numbers::pi / 2);
    const Frame g = rotate_frame(f, quarter);
    CHECK(near(g.u1.vec(), {0, 1, 0}, 1e-12));
    CHECK(near(g.u2.vec(), {-1, 0, 0}, 1e-12));
    CHECK(near(g.u3.vec(), {0, 0, 1}, 1e-12));

    Mat3 bad = Mat3::identity();
    bad.m[0] = 2.0;
    CHECK_THROWS_AS(rotate_frame(f, bad), std::domain_error);
}

TEST_CASE("build_grid basics") {
    const Frame f = Frame::canonical();
    CHECK_THROWS_AS(build_grid(f, 12), std::invalid_argument);

    const CircleGrid g = build_grid(f, 8);
    CHECK(near(g.dominant_points[0].vec(), {0, 1, 0}, 1e-12)); // beta_0 = 1 -> u2
    CHECK(g.pole_index() == 0);
    CHECK(g.equator_index() == 2);
    // alpha = 1 ring is u1 for every k; alpha = 0 ring is the circle itself.
    for (int k = 0; k < g.n; ++k) {
        CHECK(near(g.perp_point_at(g.pole_index(), k).vec(), {1, 0, 0}, 1e-12));
        CHECK(near(g.perp_point_at(g.equator_index(), k).vec(), g.dominant_points[k].vec(),
                   1e-12));
    }
}

TEST_CASE("grid points equal-arc and unit") {
    const CircleGrid g = build_grid(Frame::canonical(), 64);
    double arc0 = -1.0;
    for (int k = 0; k < g.n; ++k) {
        CHECK(std::abs(g.dominant_points[k].vec().norm() - 1.0) < 1e-10);
        const double c =
            g.dominant_points[k].dot(g.dominant_points[g.wrap(k + 1)]);
        const double arc = std::acos(std::clamp(c, -1.0, 1.0));
        if (arc0 < 0) arc0 = arc;
        CHECK(std::abs(arc - arc0) < 1e-8);
    }
    for (const auto& p : g.perp_points) CHECK(std::abs(p.vec().norm() - 1.0) < 1e-10);
}

TEST_CASE("paper index map and beta values") {
    const CircleGrid g = build_grid(Frame::canonical(), 32);
    CHECK(g.internal_to_paper(0) == 0);
    CHECK(g.internal_to_paper(3 * 32 / 4) == -32 / 4);
    CHECK(g.paper_to_internal(-8) == 24);
    // beta_k is a bijection onto the published branch values.
    std::set<int> seen;
    for (int k = 0; k < g.n; ++k) {
        const double beta = g.beta_at(k);
        CHECK(std::abs(beta) <= 2.0 + 1e-12);
        const Direction expect = beta_point(std::clamp(beta, -2.0, 2.0), g.frame);
        CHECK(near(expect.vec(), g.dominant_points[k].vec(), 1e-9));
        seen.insert(k);
    }
    CHECK(seen.size() == 32);
}

TEST_CASE("grid equivariance under rotation") {
    std::mt19937_64 rng(12345);
    const Frame f = Frame::canonical();
    for (int trial = 0; trial < 100; ++trial) {
        const Mat3 r = uniform_rotation(rng);
        const Frame rf = rotate_frame(f, r);
        const CircleGrid a = build_grid(rf, 16);
        const CircleGrid b = build_grid(f, 16);
        for (int k = 0; k < 16; ++k) {
            CHECK(near(a.dominant_points[k].vec(), r.apply(b.dominant_points[k].vec()), 1e-10));
        }
        for (int j = 0; j < 16; ++j) {
            for (int k = 0; k < 16; ++k) {
                CHECK(near(a.perp_point_at(j, k).vec(), r.apply(b.perp_point_at(j, k).vec()),
                           1e-10));
            }
        }
    }
}

TEST_CASE("perpendicular circles reflect across anchors") {
    const CircleGrid g = build_grid(Frame::canonical(), 32);
    for (int j = 0; j < g.n; ++j) {
        for (int k = 0; k < g.n; ++k) {
            CHECK(near(g.perp_point_at(j, k + g.n / 2).vec(),
                       g.perp_point_at(g.n - j, k).vec(), 1e-12));
        }
    }
}

TEST_CASE("icosphere levels") {
    CHECK(icosphere_vertices(0).size() == 12);
    CHECK(icosphere_vertices(2).size() == 162);
    CHECK(icosphere_vertices(4).size() == 2562);
}

TEST_CASE("canonical_sign") {
    CHECK(near(canonical_sign({-1, 2, 3}), {1, -2, -3}));
    CHECK(near(canonical_sign({0, -2, 3}), {0, 2, -3}));
    CHECK(near(canonical_sign({0, 0, -1}), {0, 0, 1}));
}
