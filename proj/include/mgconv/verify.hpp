#pragma once

// Equivalence suite behind `mgconv verify`: classical path against dense
// matrices, convolutional path against classical path, transfer adjointness,
// Galerkin consistency and the multiplication unit bound.

#include "mgconv/config.hpp"
#include "mgconv/convnet.hpp"
#include "mgconv/fe.hpp"
#include "mgconv/fields.hpp"
#include "mgconv/grid.hpp"
#include "mgconv/multigrid.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace mgconv {

struct CheckResult {
    std::string name;
    bool passed = false;
    double value = 0.0;
    double tolerance = 0.0;
    std::string detail;
};

inline void to_json(nlohmann::json& j, const CheckResult& r) {
    j = nlohmann::json{{"name", r.name}, {"passed", r.passed}, {"value", r.value}, {"tolerance", r.tolerance}, {"detail", r.detail}};
}

inline double relative_max_error(const Vector& got, const Vector& expected) {
    const double scale = expected.cwiseAbs().maxCoeff();
    const double diff = (got - expected).cwiseAbs().maxCoeff();
    return scale > 0.0 ? diff / scale : diff;
}

/// Hook applied to the kernel set after construction (fault injection).
using KernelHook = std::function<void(KernelSet&)>;

inline std::vector<CheckResult> run_verify_suite(const RunConfig& cfg, const KernelHook& hook = {}) {
    const GridHierarchy hier = cfg.hierarchy();
    KernelSet ks = build_kernel_set(hier);
    if (hook) hook(ks);
    const double tol = cfg.verify.tolerance;
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    auto random_vector = [&](Eigen::Index n) {
        Vector v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = unit(rng);
        return v;
    };
    std::vector<CheckResult> out;

    {
        CheckResult r{"operator_equivalence", true, 0.0, tol, ""};
        int tested = 0;
        for (int l = 1; l <= hier.num_levels(); ++l) {
            const GridLevel& lvl = hier.level(l);
            if (lvl.dof() > detail::kDenseGuard) continue;
            for (int s = 0; s < cfg.verify.samples; ++s) {
                const ParamVector y = sample_parameters(cfg.field, cfg.seed, static_cast<std::uint64_t>(s));
                const Vector kext = evaluate_kappa_extended(cfg.field, y.y, lvl);
                const Vector u = random_vector(lvl.dof());
                const TriangleIntegrals ups = triangle_integrals(kext, lvl);
                const Vector classical = apply_operator(ups, u);
                const Vector dense = assemble_dense(kext, lvl) * u;
                const Vector conv = conv_apply_operator(conv_triangle_integrals(kext, ks.at(l)), u, ks.at(l));
                r.value = std::max({r.value, relative_max_error(classical, dense), relative_max_error(conv, classical)});
                ++tested;
            }
        }
        r.passed = r.value <= tol;
        r.detail = std::to_string(tested) + " (kappa, u) pairs";
        out.push_back(r);
    }
    {
        CheckResult r{"transfer_exactness", true, 0.0, tol, ""};
        for (int l = 1; l < hier.num_levels(); ++l) {
            const GridLevel& coarse = hier.level(l);
            const GridLevel& fine = hier.level(l + 1);
            const SparseMatrix p = prolongation_matrix(hier, l);
            for (int s = 0; s < cfg.verify.samples; ++s) {
                const Vector c = random_vector(coarse.dof());
                const Vector f = random_vector(fine.dof());
                const Vector pc = conv_prolong(c, coarse, ks);
                const Vector rf = conv_restrict(f, fine, ks);
                const double lhs = pc.dot(f);
                const double rhs = c.dot(rf);
                r.value = std::max({r.value, relative_max_error(pc, p * c), relative_max_error(rf, p.transpose() * f),
                                    std::abs(lhs - rhs) / (pc.norm() * f.norm())});
            }
        }
        r.passed = r.value <= tol;
        r.detail = "prolongation, restriction, adjoint identity";
        out.push_back(r);
    }
    {
        CheckResult r{"galerkin_consistency", true, 0.0, tol, ""};
        int tested = 0;
        for (int l = 1; l < hier.num_levels(); ++l) {
            const GridLevel& fine = hier.level(l + 1);
            if (fine.dof() > detail::kDenseGuard) continue;
            const SparseMatrix p = prolongation_matrix(hier, l);
            const ParamVector y = sample_parameters(cfg.field, cfg.seed, static_cast<std::uint64_t>(l));
            const Vector kext = evaluate_kappa_extended(cfg.field, y.y, fine);
            const TriangleIntegrals fine_ups = triangle_integrals(kext, fine);
            const DenseMatrix galerkin = p.transpose() * (assemble_sparse(fine_ups) * p);
            const DenseMatrix coarse = assemble_dense(coarsen_integrals(fine_ups, hier.level(l)));
            const Tensor conv_coarse = conv_coarsen_integrals(conv_triangle_integrals(kext, ks.at(l + 1)), ks);
            const DenseMatrix conv_dense = assemble_dense(tensor_to_integrals(conv_coarse, hier.level(l)));
            const double scale = coarse.cwiseAbs().maxCoeff();
            r.value = std::max({r.value, (galerkin - coarse).cwiseAbs().maxCoeff() / scale,
                                (conv_dense - coarse).cwiseAbs().maxCoeff() / scale});
            ++tested;
        }
        r.passed = r.value <= tol;
        r.detail = std::to_string(tested) + " level pairs";
        out.push_back(r);
    }
    {
        CheckResult r{"conv_multigrid", true, 0.0, tol, ""};
        VCycleConfig vc = cfg.cycle();
        if (vc.k0 < 1) vc.k0 = 10;
        vc.m = std::min(vc.m, 5);
        const GridLevel& fine = hier.finest();
        const Vector f = rhs_vector(fine, cfg.solver.source);
        for (int s = 0; s < std::min(cfg.verify.samples, 3); ++s) {
            const ParamVector y = sample_parameters(cfg.field, cfg.seed, static_cast<std::uint64_t>(s));
            const Vector kext = evaluate_kappa_extended(cfg.field, y.y, fine);
            const Vector a = mg_solve(Vector::Zero(fine.dof()), kext, f, vc, hier);
            const Vector b = conv_mg_solve(Vector::Zero(fine.dof()), kext, f, vc, hier, ks);
            r.value = std::max(r.value, relative_max_error(b, a));
        }
        r.passed = r.value <= tol;
        r.detail = "m = " + std::to_string(vc.m) + ", k0 = " + std::to_string(vc.k0);
        out.push_back(r);
    }
    {
        CheckResult r{"mul_unit", true, 0.0, cfg.verify.mul_epsilon, ""};
        try {
            const MulUnit unit = build_mul_unit(cfg.verify.mul_bound, cfg.verify.mul_epsilon);
            r.value = mul_unit_sup_error(unit);
            r.passed = r.value <= cfg.verify.mul_epsilon && unit.weight_count() <= 9 && unit.layers() == 2;
            r.detail = std::to_string(unit.weight_count()) + " weights, lambda = " + std::to_string(unit.lambda);
        } catch (const MulUnitError& e) {
            r.passed = false;
            r.value = e.best_error;
            r.detail = e.what();
        }
        out.push_back(r);
    }
    return out;
}

} // namespace mgconv
