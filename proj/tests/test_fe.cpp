#include <catch_amalgamated.hpp>

#include "mgconv/fe.hpp"
#include "oracles.hpp"

#include <Eigen/Eigenvalues>

using namespace mgconv;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

oracle::Tri tri_at(int ex, int ey, std::size_t k) {
    const TriangleOffsets& t = adjacent_triangles()[k];
    return oracle::Tri{{ex + t[0].dx, ex + t[1].dx, ex + t[2].dx}, {ey + t[0].dy, ey + t[1].dy, ey + t[2].dy}};
}

} // namespace

TEST_CASE("triangle integrals match quadrature") {
    const GridHierarchy h(5, 2);
    const GridLevel& lvl = h.finest();
    std::mt19937_64 rng(10);
    const Vector kext = oracle::random_kappa(rng, lvl);
    const TriangleIntegrals ups = triangle_integrals(kext, lvl);
    for (int iy = 0; iy < lvl.interior_per_side(); ++iy)
        for (int ix = 0; ix < lvl.interior_per_side(); ++ix)
            for (std::size_t k = 0; k < 6; ++k)
                CHECK_THAT(ups.at(static_cast<int>(k), ix, iy), WithinRel(oracle::triangle_integral(kext, lvl, tri_at(ix + 1, iy + 1, k)), 1e-13));
}

TEST_CASE("constant coefficient integrates to the triangle area") {
    const GridHierarchy h(5, 1);
    const TriangleIntegrals ups = triangle_integrals(Vector::Constant(h.finest().extended_size(), 3.0), h.finest());
    for (const Vector& ch : ups.channel) CHECK(((ch.array() - 3.0 * 0.5 / 25.0).abs() < 1e-16).all());
}

TEST_CASE("shared triangles carry equal integrals") {
    const GridHierarchy h(4, 2);
    const GridLevel& lvl = h.finest();
    std::mt19937_64 rng(11);
    const TriangleIntegrals ups = triangle_integrals(oracle::random_kappa(rng, lvl), lvl);
    const int m = lvl.interior_per_side();
    for (int iy = 0; iy + 1 < m; ++iy)
        for (int ix = 0; ix + 1 < m; ++ix) {
            CHECK_THAT(ups.at(0, ix, iy), WithinRel(ups.at(2, ix + 1, iy), 1e-15));
            CHECK_THAT(ups.at(0, ix, iy), WithinRel(ups.at(4, ix + 1, iy + 1), 1e-15));
            CHECK_THAT(ups.at(1, ix, iy), WithinRel(ups.at(3, ix + 1, iy + 1), 1e-15));
            CHECK_THAT(ups.at(1, ix, iy), WithinRel(ups.at(5, ix, iy + 1), 1e-15));
        }
}

TEST_CASE("unit coefficient stencil") {
    const GridHierarchy h(8, 1);
    const GridLevel& lvl = h.finest();
    const TriangleIntegrals ups = triangle_integrals(Vector::Ones(lvl.extended_size()), lvl);
    Vector delta = Vector::Zero(lvl.dof());
    const int c = lvl.index(3, 3);
    delta[c] = 1.0;
    const Vector col = apply_operator(ups, delta);
    CHECK_THAT(col[c], WithinAbs(4.0, 1e-14));
    for (const Offset o : {Offset{1, 0}, Offset{-1, 0}, Offset{0, 1}, Offset{0, -1}}) CHECK_THAT(col[lvl.index(3 + o.dx, 3 + o.dy)], WithinAbs(-1.0, 1e-14));
    CHECK_THAT(col[lvl.index(4, 4)], WithinAbs(0.0, 1e-14));
    CHECK_THAT(col[lvl.index(2, 2)], WithinAbs(0.0, 1e-14));
    CHECK_THAT(col.cwiseAbs().sum(), WithinAbs(8.0, 1e-13));
}

TEST_CASE("stencil operator against element assembly and quadrature") {
    for (int cells : {3, 5, 10}) {
        const GridHierarchy h(cells, 1);
        const GridLevel& lvl = h.finest();
        std::mt19937_64 rng(static_cast<unsigned>(cells));
        const Vector kext = oracle::random_kappa(rng, lvl);
        const Eigen::MatrixXd ref = oracle::stiffness(kext, lvl);
        const Eigen::MatrixXd dense = assemble_dense(kext, lvl);
        const TriangleIntegrals ups = triangle_integrals(kext, lvl);
        CHECK(max_abs(dense - ref) <= 1e-13 * max_abs(ref));
        CHECK(max_abs(assemble_dense(ups) - ref) <= 1e-13 * max_abs(ref));
        CHECK(max_abs(Eigen::MatrixXd(assemble_sparse(kext, lvl)) - ref) <= 1e-13 * max_abs(ref));
        CHECK(max_abs(dense - dense.transpose()) == 0.0);
        for (int s = 0; s < 5; ++s) {
            const Vector u = oracle::random_vector(rng, lvl.dof());
            CHECK((apply_operator(ups, u) - ref * u).cwiseAbs().maxCoeff() <= 1e-13 * (ref * u).cwiseAbs().maxCoeff());
        }
    }
}

TEST_CASE("three cell grid") {
    const GridHierarchy h(3, 1);
    const Eigen::MatrixXd a = assemble_dense(Vector::Ones(16), h.finest());
    Eigen::MatrixXd expected(4, 4);
    expected << 4, -1, -1, 0, -1, 4, 0, -1, -1, 0, 4, -1, 0, -1, -1, 4;
    CHECK(max_abs(a - expected) < 1e-14);
}

TEST_CASE("unit coefficient spectrum") {
    const GridHierarchy h(8, 1);
    const double hh = h.finest().h;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(assemble_dense(Vector::Ones(81), h.finest()));
    const double s1 = std::sin(M_PI * hh / 2.0), s7 = std::sin(7.0 * M_PI * hh / 2.0);
    CHECK_THAT(es.eigenvalues().minCoeff(), WithinRel(8.0 * s1 * s1, 1e-12));
    CHECK_THAT(es.eigenvalues().maxCoeff(), WithinRel(8.0 * s7 * s7, 1e-12));
    std::mt19937_64 rng(12);
    const Vector kext = oracle::random_kappa(rng, h.finest());
    const Eigen::MatrixXd a = assemble_dense(kext, h.finest());
    for (int s = 0; s < 20; ++s) {
        const Vector u = oracle::random_vector(rng, 49);
        const double q = u.dot(a * u) / u.squaredNorm();
        CHECK(q > 0.0);
        CHECK(q <= 8.0 * kext.maxCoeff());
    }
}

TEST_CASE("load vector and mass matrices") {
    const GridHierarchy h(5, 2);
    CHECK(((rhs_vector(h.level(1), 1.0).array() - 1.0 / 25.0).abs() < 1e-17).all());
    CHECK_THAT(rhs_vector(h.level(2), 2.0)[0], WithinAbs(2.0 / 100.0, 1e-17));
    const SparseMatrix m = h1_mass_matrix(h.level(2));
    const double hh = h.level(2).h;
    for (int i = 0; i < m.rows(); ++i) CHECK_THAT(m.coeff(i, i), WithinAbs(4.0 + hh * hh / 2.0, 1e-13));
    const SparseMatrix l2 = l2_mass_matrix(h.level(2));
    CHECK_THAT(l2.coeff(h.level(2).index(2, 2), h.level(2).index(3, 2)), WithinAbs(hh * hh / 12.0, 1e-16));
    CHECK_THAT(l2.coeff(h.level(2).index(2, 2), h.level(2).index(3, 3)), WithinAbs(hh * hh / 12.0, 1e-16));
    CHECK(l2.coeff(h.level(2).index(2, 2), h.level(2).index(1, 3)) == 0.0);
}

TEST_CASE("norms against quadrature") {
    const GridHierarchy h(5, 2);
    const GridLevel& lvl = h.finest();
    std::mt19937_64 rng(13);
    const NormEvaluator ne(lvl);
    for (int s = 0; s < 5; ++s) {
        const Vector u = oracle::random_vector(rng, lvl.dof());
        const auto [h1, l2] = oracle::norms_squared(u, lvl);
        CHECK_THAT(ne.h1_squared(u), WithinRel(h1, 1e-12));
        CHECK_THAT(ne.l2_squared(u), WithinRel(l2, 1e-12));
        CHECK_THAT(h1_norm(u, lvl), WithinRel(std::sqrt(h1), 1e-12));
        CHECK_THAT(l2_norm(u, lvl), WithinRel(std::sqrt(l2), 1e-12));
    }
    CHECK_THROWS_AS(ne.h1(Vector::Zero(3)), std::invalid_argument);
}

TEST_CASE("coarsening map tiles each coarse triangle") {
    for (std::size_t k = 0; k < 6; ++k) {
        double covered = 0.0;
        for (const CoarseningTerm& t : coarsening_map()[k]) {
            CHECK(std::abs(t.offset.dx) <= 1);
            CHECK(std::abs(t.offset.dy) <= 1);
            covered += 1.0;
        }
        CHECK(covered == 4.0);
    }
}

TEST_CASE("coarsened integrals give the Galerkin operator") {
    const GridHierarchy h(5, 3);
    std::mt19937_64 rng(14);
    const Vector kext = oracle::random_kappa(rng, h.finest());
    const std::vector<TriangleIntegrals> ups = integral_hierarchy(kext, h);
    const auto ps = prolongation_matrices(h);
    Eigen::MatrixXd galerkin = oracle::stiffness(kext, h.finest());
    for (int l = 2; l >= 1; --l) {
        galerkin = Eigen::MatrixXd(ps[static_cast<std::size_t>(l - 1)]).transpose() * galerkin * Eigen::MatrixXd(ps[static_cast<std::size_t>(l - 1)]);
        CHECK(max_abs(assemble_dense(ups[static_cast<std::size_t>(l - 1)]) - galerkin) <= 1e-12 * max_abs(galerkin));
    }
    // affine coefficients are reproduced exactly by the coarse interpolant
    Vector affine(h.finest().extended_size());
    const int e = h.finest().extended_per_side();
    for (int j = 0; j < e; ++j)
        for (int i = 0; i < e; ++i) affine[j * e + i] = 1.0 + h.finest().coordinate(i) + 2.0 * h.finest().coordinate(j);
    const TriangleIntegrals coarse = integral_hierarchy(affine, h)[0];
    Vector affine1(h.level(1).extended_size());
    const int e1 = h.level(1).extended_per_side();
    for (int j = 0; j < e1; ++j)
        for (int i = 0; i < e1; ++i) affine1[j * e1 + i] = 1.0 + h.level(1).coordinate(i) + 2.0 * h.level(1).coordinate(j);
    const TriangleIntegrals direct = triangle_integrals(affine1, h.level(1));
    for (std::size_t k = 0; k < 6; ++k) CHECK((coarse.channel[k] - direct.channel[k]).cwiseAbs().maxCoeff() < 1e-15);
    CHECK_THROWS_AS(coarsen_integrals(ups[2], h.level(1)), std::invalid_argument);
}

TEST_CASE("interior-only coefficient and guards") {
    const GridHierarchy h(5, 1);
    const GridLevel& lvl = h.finest();
    const Vector kint = Vector::Constant(lvl.dof(), 2.0);
    const TriangleIntegrals a = triangle_integrals(kint, lvl);
    const TriangleIntegrals b = triangle_integrals(Vector::Constant(lvl.extended_size(), 2.0), lvl);
    for (std::size_t k = 0; k < 6; ++k) CHECK(a.channel[k] == b.channel[k]);
    CHECK_THROWS_AS(triangle_integrals(Vector::Ones(7), lvl), std::invalid_argument);
    CHECK_THROWS_AS(apply_operator(a, Vector::Ones(7)), std::invalid_argument);
    const GridHierarchy big(51, 2);
    CHECK_THROWS_AS(assemble_dense(Vector::Ones(big.finest().extended_size()), big.finest()), std::length_error);
    CHECK_NOTHROW(assemble_sparse(Vector::Ones(big.finest().extended_size()), big.finest()));
}
