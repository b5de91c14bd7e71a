#include <catch_amalgamated.hpp>

#include "mgconv/convnet.hpp"
#include "mgconv/fields.hpp"
#include "oracles.hpp"

using namespace mgconv;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

double rel(const Vector& a, const Vector& b) { return (a - b).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff(); }

Tensor random_tensor(std::mt19937_64& rng, int c, int r, int w) {
    Tensor t(c, r, w);
    const Vector v = oracle::random_vector(rng, static_cast<Eigen::Index>(t.data.size()));
    std::copy(v.data(), v.data() + v.size(), t.data.begin());
    return t;
}

double dot(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
    return s;
}

} // namespace

TEST_CASE("conv2d shapes and simple kernels") {
    std::mt19937_64 rng(30);
    const Tensor x = random_tensor(rng, 1, 5, 5);
    ConvKernel id(1, 1, 3, StrideMode::Vanilla, 1);
    id.w(0, 0, 1, 1) = 1.0;
    CHECK(conv2d(x, id).data == x.data);
    ConvKernel valid(1, 1, 3, StrideMode::Vanilla, 0);
    valid.w(0, 0, 0, 0) = 1.0;
    const Tensor v = conv2d(x, valid);
    CHECK(v.rows == 3);
    CHECK(v.at(0, 2, 1) == x.at(0, 2, 1));
    ConvKernel shift(1, 1, 3, StrideMode::Vanilla, 1);
    shift.w(0, 0, 1, 2) = 1.0; // picks the east neighbour
    const Tensor s = conv2d(x, shift);
    CHECK(s.at(0, 3, 2) == x.at(0, 3, 3));
    CHECK(s.at(0, 3, 4) == 0.0);
    ConvKernel biased = id;
    biased.bias = {2.0};
    CHECK(conv2d(x, biased).at(0, 1, 1) == x.at(0, 1, 1) + 2.0);

    ConvKernel strided(1, 1, 3, StrideMode::TwoStrided, 0);
    strided.w(0, 0, 1, 1) = 1.0;
    const Tensor sd = conv2d(x, strided);
    CHECK(sd.rows == 2);
    CHECK(sd.cols == 2);
    CHECK(sd.at(0, 1, 0) == x.at(0, 3, 1));
    ConvKernel transposed(1, 1, 3, StrideMode::TwoTransposeStrided, 0);
    transposed.w(0, 0, 1, 1) = 1.0;
    const Tensor td = conv2d(sd, transposed);
    CHECK(td.rows == 5);
    CHECK(td.at(0, 3, 1) == x.at(0, 3, 1));
    CHECK(td.at(0, 2, 1) == 0.0);

    CHECK_THROWS_AS(conv2d(random_tensor(rng, 1, 4, 4), strided), std::invalid_argument);
    CHECK_THROWS_AS(conv2d(random_tensor(rng, 2, 4, 4), id), std::invalid_argument);
    CHECK_THROWS_AS(to_tensor(Vector::Zero(5), 2), std::invalid_argument);
}

TEST_CASE("transposed strided convolution is the adjoint of the strided one") {
    std::mt19937_64 rng(31);
    ConvKernel s(2, 3, 3, StrideMode::TwoStrided, 0);
    const Vector w = oracle::random_vector(rng, static_cast<Eigen::Index>(s.values.size()));
    std::copy(w.data(), w.data() + w.size(), s.values.begin());
    // transpose kernel: swap in and out channels
    ConvKernel t(3, 2, 3, StrideMode::TwoTransposeStrided, 0);
    for (int o = 0; o < 3; ++o)
        for (int c = 0; c < 2; ++c)
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) t.w(c, o, ky, kx) = s.w(o, c, ky, kx);
    const Tensor fine = random_tensor(rng, 2, 9, 9);
    const Tensor coarse = random_tensor(rng, 3, 4, 4);
    CHECK_THAT(dot(conv2d(fine, s), coarse), WithinRel(dot(fine, conv2d(coarse, t)), 1e-13));
}

TEST_CASE("kernel set reproduces the classical path") {
    const GridHierarchy h(5, 3);
    const KernelSet ks = build_kernel_set(h);
    REQUIRE(ks.levels.size() == 3);
    std::mt19937_64 rng(32);
    for (int l = 1; l <= 3; ++l) {
        const GridLevel& lvl = h.level(l);
        const Vector kext = oracle::random_kappa(rng, lvl);
        const Tensor ups = conv_triangle_integrals(kext, ks.at(l));
        CHECK(ups.channels == 6);
        CHECK(ups.rows == lvl.interior_per_side());
        const TriangleIntegrals classical = triangle_integrals(kext, lvl);
        for (std::size_t k = 0; k < 6; ++k) CHECK(rel(channel_vector(ups, static_cast<int>(k)), classical.channel[k]) < 1e-14);
        const Vector u = oracle::random_vector(rng, lvl.dof());
        CHECK(rel(conv_apply_operator(ups, u, ks.at(l)), oracle::stiffness(kext, lvl) * u) < 1e-13);
        Vector delta = Vector::Zero(lvl.dof());
        delta[lvl.index(1, 1)] = 1.0;
        CHECK(rel(conv_apply_operator(ups, delta, ks.at(l)), apply_operator(classical, delta)) < 1e-14);
        CHECK(conv_apply_operator(ups, Vector::Zero(lvl.dof()), ks.at(l)).isZero(0.0));
    }
    for (int l = 1; l < 3; ++l) {
        const Vector c = oracle::random_vector(rng, h.level(l).dof());
        const Vector f = oracle::random_vector(rng, h.level(l + 1).dof());
        const SparseMatrix p = prolongation_matrix(h, l);
        CHECK(rel(conv_prolong(c, h.level(l), ks), p * c) < 1e-15);
        CHECK(rel(conv_restrict(f, h.level(l + 1), ks), p.transpose() * f) < 1e-15);
    }
    ConvKernel k0 = ks.op_kernel(2, 0);
    CHECK(k0.in_channels == 1);
    CHECK(k0.w(0, 0, 1, 1) == ks.at(2).op.w(0, 0, 1, 1));
}

TEST_CASE("corrupted kernels are detected") {
    const GridHierarchy h(5, 3);
    const KernelSet good = build_kernel_set(h);
    CHECK_NOTHROW(verify_kernel_set(good, h));
    auto expect_failure = [&](const std::function<void(KernelSet&)>& corrupt) {
        KernelSet ks = good;
        corrupt(ks);
        CHECK_THROWS_AS(verify_kernel_set(ks, h), KernelCheckFailure);
    };
    expect_failure([](KernelSet& ks) { ks.levels[0].op.w(2, 0, 1, 1) *= 1.001; });
    expect_failure([](KernelSet& ks) { ks.levels[1].kappa.w(0, 0, 1, 1) *= 1.001; });
    expect_failure([](KernelSet& ks) { ks.restrict_kernel.w(0, 0, 0, 1) = 0.25; });
    expect_failure([](KernelSet& ks) { ks.prolong_kernel.w(0, 0, 0, 2) = 0.5; });
    expect_failure([](KernelSet& ks) { ks.coarsen_kernel.w(3, 1, 1, 1) += 1.0; });
}

TEST_CASE("convolutional multigrid matches classical multigrid") {
    const GridHierarchy h(5, 3);
    const KernelSet ks = build_kernel_set(h);
    const FieldSpec spec{};
    const Vector kext = evaluate_kappa_extended(spec, sample_parameters(spec, 4, 0).y, h.finest());
    const Vector f = rhs_vector(h.finest(), 1.0);
    const Vector z = Vector::Zero(f.size());
    for (int m : {0, 1, 3}) {
        const VCycleConfig cfg = VCycleConfig::symmetric(2, 8, m);
        const Vector a = mg_solve(z, kext, f, cfg, h);
        const Vector b = conv_mg_solve(z, kext, f, cfg, h, ks);
        if (m == 0) CHECK(b == z);
        else CHECK(rel(b, a) < 1e-12);
    }
    CHECK_THROWS_AS(conv_mg_solve(z, kext, f, VCycleConfig::symmetric(2, 0, 1), h, ks), std::invalid_argument);
}

TEST_CASE("activations") {
    CHECK(activate(Activation::ShiftedSoftplus, 0.0) == 0.0);
    CHECK_THAT(activate(Activation::Softplus, 0.0), WithinAbs(std::log(2.0), 1e-16));
    CHECK_THAT(activate(Activation::Softplus, 800.0), WithinRel(800.0, 1e-15));
    CHECK(activate(Activation::Softplus, -800.0) >= 0.0);
    CHECK_THAT(activation_second_derivative(Activation::Softplus, 0.0), WithinAbs(0.25, 1e-16));
    const double t = 0.7, d = 1e-4;
    const double fd = (activate(Activation::Softplus, t + d) - 2 * activate(Activation::Softplus, t) + activate(Activation::Softplus, t - d)) / (d * d);
    CHECK_THAT(activation_second_derivative(Activation::Softplus, t), WithinAbs(fd, 1e-6));
}

TEST_CASE("multiplication unit") {
    const MulUnit unit = build_mul_unit(1.0, 1e-3);
    CHECK(unit.layers() == 2);
    CHECK(unit.weight_count() == 9);
    CHECK(unit.layer1.bias.empty());
    CHECK(unit.layer2.bias.empty());
    CHECK(mul_unit_sup_error(unit) <= 1e-3);
    CHECK(unit.achieved_error == mul_unit_sup_error(unit));
    // off-grid points
    std::mt19937_64 rng(33);
    const Tensor x = random_tensor(rng, 1, 20, 20), y = random_tensor(rng, 1, 20, 20);
    const Tensor z = mul_apply(unit, x, y);
    for (std::size_t i = 0; i < z.data.size(); ++i) CHECK(std::abs(z.data[i] - x.data[i] * y.data[i]) <= 1.01e-3);
    // the unit is exact on the axes
    Tensor zero(1, 1, 1), one(1, 1, 1);
    one.data[0] = 0.8;
    CHECK_THAT(mul_apply(unit, zero, one).data[0], WithinAbs(0.0, 1e-15));
    const MulUnit finer = build_mul_unit(1.0, 1e-4);
    CHECK(finer.lambda < unit.lambda);
    CHECK(mul_unit_sup_error(finer) <= 1e-4);
    const MulUnit plain = build_mul_unit(1.0, 1e-3, Activation::Softplus);
    CHECK(plain.weight_count() == 10);
    const MulUnit shifted = build_mul_unit(2.0, 1e-3, Activation::ShiftedSoftplus, 0.5);
    CHECK(shifted.weight_count() == 13);
    CHECK(mul_unit_sup_error(shifted) <= 1e-3);
    CHECK_THROWS_AS(build_mul_unit(0.0, 1e-3), std::invalid_argument);
    CHECK_THROWS_AS(build_mul_unit(1.0, 0.7), std::invalid_argument);
}

TEST_CASE("approximate operator error is bounded by six products") {
    const GridHierarchy h(5, 2);
    const KernelSet ks = build_kernel_set(h);
    const GridLevel& lvl = h.finest();
    std::mt19937_64 rng(34);
    const Tensor ups = conv_triangle_integrals(oracle::random_kappa(rng, lvl), ks.at(2));
    const Vector u = oracle::random_vector(rng, lvl.dof(), -2e-3, 2e-3);
    const Vector exact = conv_apply_operator(ups, u, ks.at(2));
    const Tensor stencil_out = conv2d(to_tensor(u, lvl.interior_per_side()), ks.at(2).op);
    double bound = 0.0;
    for (double v : stencil_out.data) bound = std::max(bound, std::abs(v));
    for (double v : ups.data) bound = std::max(bound, std::abs(v));
    CHECK(bound <= 1.0);
    for (double eps : {1e-2, 1e-3, 1e-4}) {
        const MulUnit unit = build_mul_unit(bound, eps);
        const double err = (approx_conv_apply_operator(ups, u, ks.at(2), unit) - exact).cwiseAbs().maxCoeff();
        CHECK(err <= 6.0 * eps);
    }
    const MulUnit tight = build_mul_unit(0.5 * bound, 1e-3);
    CHECK_THROWS_AS(approx_conv_apply_operator(ups, u, ks.at(2), tight), std::domain_error);
}

TEST_CASE("weight budget") {
    const WeightBudget b = WeightBudget::canonical();
    CHECK(b.op_kernel == 54);
    CHECK(b.mul_unit == 9);
    CHECK(b.operator_apply() == 114);
    CHECK(b.smoothing_step() == 117);
    CHECK(b.residual() == 116);
    CHECK(b.transfer() == 136);
    CHECK(b.kappa_kernel == 54);
    CHECK(b.coarsen_kernel == 324);
    CHECK(b.output == 1);
}

TEST_CASE("weight count") {
    // closed form for k0 > 0: every level has a coarse branch
    auto closed = [](int L, int k, int k0, int m) {
        return 55 + 324 * (L - 1) + m * (117 * k0 + (L - 1) * (2 * k * 117 + 136));
    };
    for (int L : {1, 3, 6})
        for (int k : {0, 1, 3})
            for (int m : {0, 1, 4}) CHECK(count_weights(L, k, 4, m) == static_cast<std::size_t>(closed(L, k, 4, m)));
    // direct coarse solve is not a network: with k0 = 0 the level-2 branch is skipped
    CHECK(count_weights(3, 2, 0, 1) == static_cast<std::size_t>(55 + 648 + 2 * 4 * 117 + 136));
    CHECK(count_weights(3, 0, 0, 2) == static_cast<std::size_t>(55 + 648));
    // linear in L
    const auto w = [](int L) { return static_cast<long long>(count_weights(L, 3, 4, 2)); };
    CHECK(w(5) - 2 * w(4) + w(3) == 0);
    CHECK_THROWS_AS(count_weights(0, 1, 1, 1), std::invalid_argument);
}
