#include <catch_amalgamated.hpp>

#include "mgconv/grid.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <random>
#include <set>

using namespace mgconv;
using Catch::Matchers::WithinAbs;

namespace {

/// Hat function of a vertex at offset (s, t) in mesh units, diagonal lower-left to upper-right.
double hat(double s, double t) { return std::max(0.0, 1.0 - std::max({std::abs(s), std::abs(t), std::abs(s - t)})); }

/// Value of the FE function with interior coefficients u at a point, summed over hats.
double hat_sum(const GridLevel& lvl, const Vector& u, double x, double y) {
    double v = 0.0;
    const int m = lvl.interior_per_side();
    for (int iy = 0; iy < m; ++iy)
        for (int ix = 0; ix < m; ++ix) v += u[lvl.index(ix, iy)] * hat(x * lvl.cells - (ix + 1), y * lvl.cells - (iy + 1));
    return v;
}

} // namespace

TEST_CASE("hierarchy sizes") {
    const GridHierarchy h(5, 7);
    const std::vector<int> cells{5, 10, 20, 40, 80, 160, 320};
    REQUIRE(h.num_levels() == 7);
    for (int l = 1; l <= 7; ++l) {
        CHECK(h.level(l).cells == cells[static_cast<std::size_t>(l - 1)]);
        CHECK(h.level(l).h == 1.0 / cells[static_cast<std::size_t>(l - 1)]);
        CHECK(h.level(l).dof() == h.level(l).interior_per_side() * h.level(l).interior_per_side());
    }
    CHECK(GridHierarchy(5, 1).finest().dof() == 16);
    const GridHierarchy small = build_hierarchy(3, 3);
    CHECK(small.level(1).dof() == 4);
    CHECK(small.level(2).dof() == 25);
    CHECK(small.level(3).dof() == 121);
}

TEST_CASE("hierarchy rejects degenerate input") {
    CHECK_THROWS_AS(GridHierarchy(1, 3), std::invalid_argument);
    CHECK_THROWS_AS(GridHierarchy(5, 0), std::invalid_argument);
    CHECK_THROWS_AS(GridHierarchy(5, 2).level(3), std::out_of_range);
    CHECK_THROWS_AS(GridHierarchy(5, 2).level(0), std::out_of_range);
}

TEST_CASE("six adjacent triangles are counterclockwise and cover each edge neighbor twice") {
    std::multiset<std::pair<int, int>> seen;
    for (const TriangleOffsets& t : adjacent_triangles()) {
        CHECK(t[0] == Offset{0, 0});
        const int cross = t[1].dx * t[2].dy - t[1].dy * t[2].dx;
        CHECK(cross == 1);
        seen.insert({t[1].dx, t[1].dy});
        seen.insert({t[2].dx, t[2].dy});
    }
    for (const Offset& o : edge_neighbors()) CHECK(seen.count({o.dx, o.dy}) == 2);
    CHECK(seen.size() == 12);
}

TEST_CASE("prolongation columns") {
    const GridHierarchy h(5, 3);
    const SparseMatrix p = prolongation_matrix(h, 2);
    CHECK(p.rows() == h.level(3).dof());
    CHECK(p.cols() == h.level(2).dof());
    const Eigen::MatrixXd dense = Eigen::MatrixXd(p);
    for (int c = 0; c < p.cols(); ++c) {
        const int a = c % h.level(2).interior_per_side();
        const int b = c / h.level(2).interior_per_side();
        CHECK(dense(h.level(3).index(2 * a + 1, 2 * b + 1), c) == 1.0);
        CHECK(dense.col(c).sum() == 4.0);
        CHECK((dense.col(c).array() != 0.0).count() == 7);
    }
    CHECK_THROWS_AS(prolongation_matrix(h, 3), std::out_of_range);
    CHECK_THROWS_AS(prolongation_matrix(h, 0), std::out_of_range);
}

TEST_CASE("prolongation of the constant coarse vector is one at coarse-aligned fine vertices") {
    const GridHierarchy h(4, 2);
    const Vector pu = prolongation_matrix(h, 1) * Vector::Ones(h.level(1).dof());
    for (int b = 0; b < h.level(1).interior_per_side(); ++b)
        for (int a = 0; a < h.level(1).interior_per_side(); ++a) CHECK(pu[h.level(2).index(2 * a + 1, 2 * b + 1)] == 1.0);
}

TEST_CASE("prolongation reproduces the coarse FE function at fine vertices") {
    const GridHierarchy h(3, 2);
    const SparseMatrix p = prolongation_matrix(h, 1);
    std::mt19937_64 rng(1);
    const Vector u = oracle::random_vector(rng, h.level(1).dof());
    const Vector pu = p * u;
    const GridLevel& fine = h.level(2);
    for (int iy = 0; iy < fine.interior_per_side(); ++iy)
        for (int ix = 0; ix < fine.interior_per_side(); ++ix)
            CHECK_THAT(pu[fine.index(ix, iy)], WithinAbs(hat_sum(h.level(1), u, fine.coordinate(ix + 1), fine.coordinate(iy + 1)), 1e-14));
}

TEST_CASE("nestedness at random points") {
    const GridHierarchy h(5, 3);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> pos(0.0, 1.0);
    for (int l = 1; l < 3; ++l) {
        const Vector u = oracle::random_vector(rng, h.level(l).dof());
        const Vector pu = prolongation_matrix(h, l) * u;
        for (int i = 0; i < 1000; ++i) {
            const double x = pos(rng), y = pos(rng);
            const double coarse = evaluate_fe(h.level(l), u, x, y);
            CHECK_THAT(evaluate_fe(h.level(l + 1), pu, x, y), WithinAbs(coarse, 1e-12));
            if (i < 50) CHECK_THAT(coarse, WithinAbs(hat_sum(h.level(l), u, x, y), 1e-12));
        }
    }
}

TEST_CASE("nodal interpolation") {
    const GridHierarchy h(5, 3);
    std::mt19937_64 rng(3);
    const Vector u = oracle::random_vector(rng, h.level(3).dof());
    CHECK(nodal_interpolate_to_coarse(h, 3, 3, u) == u);
    const Vector ones = nodal_interpolate_to_coarse(h, 3, 1, Vector::Constant(h.level(3).dof(), 2.5));
    CHECK((ones.array() == 2.5).all());
    const Vector sub = nodal_interpolate_to_coarse(h, 3, 1, u);
    for (int b = 0; b < 4; ++b)
        for (int a = 0; a < 4; ++a) CHECK(sub[h.level(1).index(a, b)] == u[h.level(3).index(4 * a + 3, 4 * b + 3)]);
    const Vector c = oracle::random_vector(rng, h.level(2).dof());
    CHECK(nodal_interpolate_to_coarse(h, 3, 2, prolongation_matrix(h, 2) * c) == c);
    CHECK_THROWS_AS(nodal_interpolate_to_coarse(h, 1, 2, sub), std::invalid_argument);
    CHECK_THROWS_AS(nodal_interpolate_to_coarse(h, 3, 1, sub), std::invalid_argument);
}

TEST_CASE("prolongate_to chains the level matrices") {
    const GridHierarchy h(5, 3);
    const auto ps = prolongation_matrices(h);
    std::mt19937_64 rng(4);
    const Vector u = oracle::random_vector(rng, h.level(1).dof());
    const Vector direct = ps[1] * (ps[0] * u);
    CHECK((prolongate_to(ps, 1, 3, u) - direct).cwiseAbs().maxCoeff() == 0.0);
}
