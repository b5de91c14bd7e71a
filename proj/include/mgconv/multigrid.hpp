#pragma once

// Classical geometric multigrid with a damped Richardson smoother.
//
// Coarse operators are never formed as P^T A P: each level carries the exact
// triangle integrals of the finest coefficient (obtained by coarsening), which
// yields the same matrix (see the Galerkin consistency tests).

#include "mgconv/fe.hpp"
#include "mgconv/grid.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mgconv {

enum class OmegaMode { Fixed, AutoPowerIteration };

struct VCycleConfig {
    int k_pre = 3;
    int k_post = 3;
    /// Richardson steps on the coarsest level; 0 selects a direct solve there.
    int k0 = 0;
    int m = 1;
    OmegaMode omega_mode = OmegaMode::AutoPowerIteration;
    double omega = 0.0;

    void validate() const {
        if (k_pre < 0 || k_post < 0 || k0 < 0) {
            throw std::invalid_argument("smoothing step counts must be non-negative");
        }
        if (m < 0) {
            throw std::invalid_argument("number of V-cycles must be non-negative");
        }
        if (omega_mode == OmegaMode::Fixed && !(omega > 0.0)) {
            throw std::invalid_argument("fixed omega must be positive");
        }
    }

    static VCycleConfig symmetric(int k, int k0 = 0, int m = 1) {
        VCycleConfig cfg;
        cfg.k_pre = k;
        cfg.k_post = k;
        cfg.k0 = k0;
        cfg.m = m;
        return cfg;
    }
};

inline constexpr int kPowerIterations = 50;
inline constexpr double kOmegaSafety = 0.9;

/// Deterministic start vector for power iteration: an oscillating pattern with a smooth envelope.
inline Vector power_iteration_start(const GridLevel& level) {
    const int m = level.interior_per_side();
    Vector v(level.dof());
    for (int iy = 0; iy < m; ++iy) {
        for (int ix = 0; ix < m; ++ix) {
            const double sign = ((ix + iy) % 2 == 0) ? 1.0 : -1.0;
            v[level.index(ix, iy)] = sign * (1.0 + 0.25 * std::sin(1.0 + ix + 2.0 * iy));
        }
    }
    return v;
}

/// Largest eigenvalue estimate of a symmetric positive operator via power iteration (Rayleigh quotient).
template <class Apply>
double power_iteration_lambda_max(Apply&& apply, Vector v, int iterations = kPowerIterations) {
    double lambda = 0.0;
    v /= v.norm();
    for (int it = 0; it < iterations; ++it) {
        Vector w = apply(v);
        lambda = v.dot(w);
        const double nrm = w.norm();
        if (nrm == 0.0) return 0.0;
        v = w / nrm;
    }
    return lambda;
}

/// Damping 0.9 / lambda_max, lambda_max from 50 power-iteration steps on the stencil operator.
inline double estimate_omega(const TriangleIntegrals& ups, const StencilConstants& stencils) {
    const double lambda = power_iteration_lambda_max([&](const Vector& x) { return apply_operator(ups, stencils, x); },
                                                     power_iteration_start(ups.level));
    if (!(lambda > 0.0)) {
        throw std::runtime_error("estimate_omega: operator is not positive (lambda_max estimate " +
                                 std::to_string(lambda) + ")");
    }
    return kOmegaSafety / lambda;
}

inline double estimate_omega(const TriangleIntegrals& ups) {
    return estimate_omega(ups, StencilConstants::compute(ups.level.h));
}

/// `steps` updates u <- u + omega (f - A u).
inline Vector richardson(Vector u, const Vector& f, const TriangleIntegrals& ups, const StencilConstants& stencils,
                         double omega, int steps) {
    detail::check_size(u, ups.level.dof(), "richardson iterate");
    detail::check_size(f, ups.level.dof(), "richardson right-hand side");
    if (!(omega > 0.0)) throw std::invalid_argument("richardson: omega must be positive");
    for (int s = 0; s < steps; ++s) {
        const Vector au = apply_operator(ups, stencils, u);
        u += omega * (f - au);
    }
    return u;
}

inline Vector richardson(Vector u, const Vector& f, const TriangleIntegrals& ups, double omega, int steps) {
    return richardson(std::move(u), f, ups, StencilConstants::compute(ups.level.h), omega, steps);
}

/// Everything a V-cycle needs on every level, derived from one finest-level coefficient.
struct OperatorStack {
    GridHierarchy hier;
    std::vector<TriangleIntegrals> integrals;
    std::vector<StencilConstants> stencils;
    std::vector<double> omega;
    std::vector<SparseMatrix> prolongations;
    std::shared_ptr<const Eigen::LLT<DenseMatrix>> coarse_solver;

    const TriangleIntegrals& ups(int l) const { return integrals[static_cast<std::size_t>(l - 1)]; }
    const StencilConstants& stencil(int l) const { return stencils[static_cast<std::size_t>(l - 1)]; }
    double omega_at(int l) const { return omega[static_cast<std::size_t>(l - 1)]; }
    const SparseMatrix& prolongation(int l) const { return prolongations[static_cast<std::size_t>(l - 1)]; }

    Vector apply(int l, const Vector& u) const { return apply_operator(ups(l), stencil(l), u); }

    static OperatorStack build(const Vector& kappa_fine, const GridHierarchy& hier, const VCycleConfig& cfg) {
        cfg.validate();
        OperatorStack s;
        s.hier = hier;
        s.integrals = integral_hierarchy(kappa_fine, hier);
        s.prolongations = prolongation_matrices(hier);
        for (const GridLevel& lvl : hier.levels()) {
            s.stencils.push_back(StencilConstants::compute(lvl.h));
        }
        for (int l = 1; l <= hier.num_levels(); ++l) {
            s.omega.push_back(cfg.omega_mode == OmegaMode::Fixed ? cfg.omega : estimate_omega(s.ups(l), s.stencil(l)));
        }
        if (cfg.k0 == 0) {
            auto llt = std::make_shared<Eigen::LLT<DenseMatrix>>(assemble_dense(s.ups(1)));
            if (llt->info() != Eigen::Success) {
                throw std::runtime_error("coarse-level operator is not positive definite");
            }
            s.coarse_solver = std::move(llt);
        }
        return s;
    }
};

/// One V-cycle on level l.
inline Vector v_cycle(Vector u, const Vector& f, const OperatorStack& stack, const VCycleConfig& cfg, int l) {
    if (l < 1 || l > stack.hier.num_levels()) {
        throw std::out_of_range("v_cycle: level " + std::to_string(l) + " not in the operator stack");
    }
    const TriangleIntegrals& ups = stack.ups(l);
    detail::check_size(u, ups.level.dof(), "v_cycle iterate");
    detail::check_size(f, ups.level.dof(), "v_cycle right-hand side");

    if (l == 1) {
        if (cfg.k0 == 0) {
            if (!stack.coarse_solver) throw std::runtime_error("v_cycle: no coarse factorization (k0 = 0 needs one)");
            return stack.coarse_solver->solve(f);
        }
        return richardson(std::move(u), f, ups, stack.stencil(1), stack.omega_at(1), cfg.k0);
    }

    const double omega = stack.omega_at(l);
    u = richardson(std::move(u), f, ups, stack.stencil(l), omega, cfg.k_pre);
    const Vector residual = f - stack.apply(l, u);
    const SparseMatrix& p = stack.prolongation(l - 1);
    const Vector coarse_residual = p.transpose() * residual;
    const Vector correction =
        v_cycle(Vector::Zero(coarse_residual.size()), coarse_residual, stack, cfg, l - 1);
    u += p * correction;
    return richardson(std::move(u), f, ups, stack.stencil(l), omega, cfg.k_post);
}

/// m V-cycles on the finest level of a prepared stack.
inline Vector mg_iterate(Vector u, const Vector& f, const OperatorStack& stack, const VCycleConfig& cfg, int m) {
    const int top = stack.hier.num_levels();
    for (int i = 0; i < m; ++i) u = v_cycle(std::move(u), f, stack, cfg, top);
    return u;
}

/// The iterated solver: cfg.m V-cycles from u0 for the coefficient kappa (finest level).
inline Vector mg_solve(const Vector& u0, const Vector& kappa_fine, const Vector& f, const VCycleConfig& cfg,
                       const GridHierarchy& hier) {
    const OperatorStack stack = OperatorStack::build(kappa_fine, hier, cfg);
    return mg_iterate(u0, f, stack, cfg, cfg.m);
}

struct SolveReport {
    Vector u;
    int cycles = 0;
    double relative_residual = 0.0;
    bool converged = false;
};

/// V-cycles until ||f - A u||_2 <= rtol ||f||_2 or max_cycles.
inline SolveReport mg_solve_to_tolerance(const Vector& u0, const Vector& f, const OperatorStack& stack,
                                         const VCycleConfig& cfg, double rtol, int max_cycles) {
    const int top = stack.hier.num_levels();
    const double fnorm = f.norm();
    SolveReport r{u0, 0, 0.0, false};
    auto residual = [&] { return (f - stack.apply(top, r.u)).norm() / (fnorm > 0.0 ? fnorm : 1.0); };
    r.relative_residual = residual();
    while (r.relative_residual > rtol && r.cycles < max_cycles) {
        r.u = v_cycle(std::move(r.u), f, stack, cfg, top);
        ++r.cycles;
        r.relative_residual = residual();
    }
    r.converged = r.relative_residual <= rtol;
    return r;
}

/// Sparse direct reference solution of A u = f for a nodal coefficient.
inline Vector reference_solve(const SparseMatrix& a, const Vector& f) {
    Eigen::SimplicialLDLT<SparseMatrix> ldlt(a);
    if (ldlt.info() != Eigen::Success) throw std::runtime_error("reference solve: factorization failed");
    Vector u = ldlt.solve(f);
    if (ldlt.info() != Eigen::Success) throw std::runtime_error("reference solve: back substitution failed");
    return u;
}

inline constexpr int kContractionGuard = 100000;
inline constexpr double kContractionFloor = 1e-11;

/// Energy-norm error ratios ||e^{i+1}||_A / ||e^i||_A over cfg.m cycles started from zero.
inline std::vector<double> measure_contraction(const Vector& kappa_fine, const Vector& f, const VCycleConfig& cfg,
                                               const GridHierarchy& hier) {
    const GridLevel& fine = hier.finest();
    if (fine.dof() > kContractionGuard) {
        throw std::length_error("measure_contraction: reference solve refused for " + std::to_string(fine.dof()) +
                                " unknowns");
    }
    const OperatorStack stack = OperatorStack::build(kappa_fine, hier, cfg);
    const Vector exact = reference_solve(assemble_sparse(kappa_fine, fine), f);
    const int top = hier.num_levels();
    auto energy = [&](const Vector& e) { return std::sqrt(std::max(0.0, e.dot(stack.apply(top, e)))); };

    std::vector<double> ratios;
    Vector u = Vector::Zero(fine.dof());
    double prev = energy(u - exact);
    // below this the error is round-off and ratios carry no information
    const double noise = kContractionFloor * prev;
    for (int i = 0; i < cfg.m; ++i) {
        if (prev <= noise || prev == 0.0) break;
        u = v_cycle(std::move(u), f, stack, cfg, top);
        const double cur = energy(u - exact);
        ratios.push_back(cur / prev);
        prev = cur;
    }
    return ratios;
}

inline double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------------------
// Multilevel solve schedule

/// Cycle counts m_1..m_L: m_l >= log 2 / log(1/mu) below the top,
/// m_L >= (log(2 c^2 L / eps) - L log 2) / log(1/mu), every count at least 1.
inline std::vector<int> ml_schedule(double mu, double eps, int num_levels, double c = 1.0) {
    if (!(mu > 0.0) || !(mu < 1.0)) {
        throw std::invalid_argument("ml_schedule: contraction estimate must lie in (0, 1), got " + std::to_string(mu));
    }
    if (!(eps > 0.0)) throw std::invalid_argument("ml_schedule: target accuracy must be positive");
    const double rate = std::log(1.0 / mu);
    std::vector<int> m(static_cast<std::size_t>(num_levels));
    const int lower = std::max(1, static_cast<int>(std::ceil(std::log(2.0) / rate - 1e-12)));
    for (int l = 1; l < num_levels; ++l) m[static_cast<std::size_t>(l - 1)] = lower;
    const double top = (std::log(2.0 * c * c * num_levels / eps) - num_levels * std::log(2.0)) / rate;
    m.back() = std::max(num_levels == 1 ? lower : 1, static_cast<int>(std::ceil(top - 1e-12)));
    return m;
}

struct MultilevelSolve {
    /// Accumulated approximations v~_l on every level.
    std::vector<Vector> approx;
    /// Per-level corrections returned by the V-cycles (approx_l = correction_l + P approx_{l-1}).
    std::vector<Vector> corrections;
    std::vector<int> cycles;

    int total_cycles() const {
        int s = 0;
        for (int c : cycles) s += c;
        return s;
    }
};

/// Coarse-to-fine solve: each level solves for the correction to the prolongated coarser approximation.
inline MultilevelSolve ml_solve(const Vector& kappa_fine, double source, const GridHierarchy& hier, double eps,
                                const VCycleConfig& smoothing, double mu, double c = 1.0) {
    const int num_levels = hier.num_levels();
    const std::vector<int> schedule = ml_schedule(mu, eps, num_levels, c);
    const OperatorStack stack = OperatorStack::build(kappa_fine, hier, smoothing);

    MultilevelSolve out;
    for (int l = 1; l <= num_levels; ++l) {
        const GridLevel& lvl = hier.level(l);
        const Vector f = rhs_vector(lvl, source);
        Vector base = Vector::Zero(lvl.dof());
        if (l > 1) base = stack.prolongation(l - 1) * out.approx.back();
        const Vector rhs = l > 1 ? Vector(f - stack.apply(l, base)) : f;
        Vector corr = Vector::Zero(lvl.dof());
        const int m = schedule[static_cast<std::size_t>(l - 1)];
        for (int i = 0; i < m; ++i) corr = v_cycle(std::move(corr), rhs, stack, smoothing, l);
        out.corrections.push_back(corr);
        out.approx.push_back(corr + base);
        out.cycles.push_back(m);
    }
    return out;
}

} // namespace mgconv
