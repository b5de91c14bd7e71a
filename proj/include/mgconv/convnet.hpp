#pragma once

// Convolutional realization of the multigrid building blocks.
//
// Every matrix action of the classical path is expressed with explicit
// kernels and three convolution types:
//   vanilla                 cross-correlation, zero padding `padding`
//   two-strided             (2w+1) x (2w+1) -> w x w, output y reads input 2y..2y+2
//   two-transpose-strided   w x w -> (2w+1) x (2w+1), input y scatters to 2y..2y+2
// The strided pair matches the interior-vertex counts of consecutive levels,
// (n_{l+1} - 1) = 2 (n_l - 1) + 1, so the coarse vertex a sits at fine index 2a+1.

#include "mgconv/fe.hpp"
#include "mgconv/grid.hpp"
#include "mgconv/multigrid.hpp"

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace mgconv {

enum class StrideMode { Vanilla, TwoStrided, TwoTransposeStrided };

/// Channels x rows x cols, row-major inside a channel.
struct Tensor {
    int channels = 0;
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(int c, int r, int w) : channels(c), rows(r), cols(w), data(static_cast<std::size_t>(c) * r * w, 0.0) {}

    double& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * rows + y) * cols + x]; }
    double at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * rows + y) * cols + x]; }

    std::size_t plane() const { return static_cast<std::size_t>(rows) * cols; }
};

inline Tensor to_tensor(const Vector& v, int side) {
    if (v.size() != static_cast<Eigen::Index>(side) * side) {
        throw std::invalid_argument("to_tensor: vector of size " + std::to_string(v.size()) + " is not " +
                                    std::to_string(side) + "^2");
    }
    Tensor t(1, side, side);
    std::copy(v.data(), v.data() + v.size(), t.data.begin());
    return t;
}

inline Vector channel_vector(const Tensor& t, int c = 0) {
    Vector v(static_cast<Eigen::Index>(t.plane()));
    const auto first = t.data.begin() + static_cast<std::ptrdiff_t>(t.plane() * static_cast<std::size_t>(c));
    std::copy(first, first + static_cast<std::ptrdiff_t>(t.plane()), v.data());
    return v;
}

inline Tensor stack_channels(const std::vector<const Vector*>& channels, int side) {
    Tensor t(static_cast<int>(channels.size()), side, side);
    for (std::size_t c = 0; c < channels.size(); ++c) {
        const Vector& v = *channels[c];
        if (v.size() != static_cast<Eigen::Index>(t.plane())) throw std::invalid_argument("stack_channels: size mismatch");
        std::copy(v.data(), v.data() + v.size(), t.data.begin() + static_cast<std::ptrdiff_t>(c * t.plane()));
    }
    return t;
}

struct ConvKernel {
    int in_channels = 1;
    int out_channels = 1;
    int size = 3;
    StrideMode mode = StrideMode::Vanilla;
    /// Zero-padding ring width (vanilla only).
    int padding = 1;
    /// [out][in][ky][kx]
    std::vector<double> values;
    /// Empty when the layer carries no bias.
    std::vector<double> bias;

    ConvKernel() = default;
    ConvKernel(int in, int out, int k, StrideMode m, int pad = 1)
        : in_channels(in), out_channels(out), size(k), mode(m), padding(pad),
          values(static_cast<std::size_t>(in) * out * k * k, 0.0) {}

    double& w(int o, int c, int ky, int kx) {
        return values[((static_cast<std::size_t>(o) * in_channels + c) * size + ky) * size + kx];
    }
    double w(int o, int c, int ky, int kx) const {
        return values[((static_cast<std::size_t>(o) * in_channels + c) * size + ky) * size + kx];
    }

    /// Instantiated parameters: every kernel entry plus the bias vector if present.
    std::size_t parameter_count() const { return values.size() + bias.size(); }
};

/// Output spatial extent of a convolution for an input extent.
inline int conv_output_extent(const ConvKernel& k, int in) {
    switch (k.mode) {
    case StrideMode::Vanilla: return in + 2 * k.padding - (k.size - 1);
    case StrideMode::TwoStrided:
        if (in % 2 == 0 || k.size != 3) throw std::invalid_argument("two-strided convolution needs odd input and 3x3 kernel");
        return (in - 1) / 2;
    case StrideMode::TwoTransposeStrided:
        if (k.size != 3) throw std::invalid_argument("two-transpose-strided convolution needs a 3x3 kernel");
        return 2 * in + 1;
    }
    return 0;
}

inline Tensor conv2d(const Tensor& in, const ConvKernel& k) {
    if (in.channels != k.in_channels) {
        throw std::invalid_argument("conv2d: input has " + std::to_string(in.channels) + " channels, kernel expects " +
                                    std::to_string(k.in_channels));
    }
    if (!k.bias.empty() && static_cast<int>(k.bias.size()) != k.out_channels) {
        throw std::invalid_argument("conv2d: bias size does not match output channels");
    }
    const int rows = conv_output_extent(k, in.rows);
    const int cols = conv_output_extent(k, in.cols);
    if (rows < 0 || cols < 0) throw std::invalid_argument("conv2d: input too small for kernel");
    Tensor out(k.out_channels, rows, cols);

    switch (k.mode) {
    case StrideMode::Vanilla:
        for (int o = 0; o < k.out_channels; ++o) {
            for (int y = 0; y < rows; ++y) {
                for (int x = 0; x < cols; ++x) {
                    double s = 0.0;
                    for (int c = 0; c < k.in_channels; ++c) {
                        for (int ky = 0; ky < k.size; ++ky) {
                            const int iy = y + ky - k.padding;
                            if (iy < 0 || iy >= in.rows) continue;
                            for (int kx = 0; kx < k.size; ++kx) {
                                const int ix = x + kx - k.padding;
                                if (ix < 0 || ix >= in.cols) continue;
                                s += k.w(o, c, ky, kx) * in.at(c, iy, ix);
                            }
                        }
                    }
                    out.at(o, y, x) = k.bias.empty() ? s : s + k.bias[static_cast<std::size_t>(o)];
                }
            }
        }
        break;
    case StrideMode::TwoStrided:
        for (int o = 0; o < k.out_channels; ++o) {
            for (int y = 0; y < rows; ++y) {
                for (int x = 0; x < cols; ++x) {
                    double s = 0.0;
                    for (int c = 0; c < k.in_channels; ++c) {
                        for (int ky = 0; ky < 3; ++ky) {
                            for (int kx = 0; kx < 3; ++kx) {
                                s += k.w(o, c, ky, kx) * in.at(c, 2 * y + ky, 2 * x + kx);
                            }
                        }
                    }
                    out.at(o, y, x) = k.bias.empty() ? s : s + k.bias[static_cast<std::size_t>(o)];
                }
            }
        }
        break;
    case StrideMode::TwoTransposeStrided:
        for (int o = 0; o < k.out_channels; ++o) {
            for (int c = 0; c < k.in_channels; ++c) {
                for (int y = 0; y < in.rows; ++y) {
                    for (int x = 0; x < in.cols; ++x) {
                        const double v = in.at(c, y, x);
                        for (int ky = 0; ky < 3; ++ky) {
                            for (int kx = 0; kx < 3; ++kx) {
                                out.at(o, 2 * y + ky, 2 * x + kx) += k.w(o, c, ky, kx) * v;
                            }
                        }
                    }
                }
            }
            if (!k.bias.empty()) {
                for (std::size_t i = 0; i < out.plane(); ++i) {
                    out.data[static_cast<std::size_t>(o) * out.plane() + i] += k.bias[static_cast<std::size_t>(o)];
                }
            }
        }
        break;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Kernel construction

/// Kernels whose values depend on the mesh size.
struct LevelKernels {
    GridLevel level;
    /// 1 -> 6 channels, channel k is the operator stencil of triangle k.
    ConvKernel op;
    /// 1 -> 6 channels, valid convolution on the extended (boundary ring) coefficient.
    ConvKernel kappa;
};

struct KernelSet {
    std::vector<LevelKernels> levels;
    /// 1 -> 1, two-strided: P^T.
    ConvKernel restrict_kernel;
    /// 1 -> 1, two-transpose-strided: P.
    ConvKernel prolong_kernel;
    /// 6 -> 6, two-strided: fine triangle integrals -> coarse triangle integrals.
    ConvKernel coarsen_kernel;

    const LevelKernels& at(int l) const { return levels[static_cast<std::size_t>(l - 1)]; }

    /// Kernel K^(k) as a 1 -> 1 kernel.
    ConvKernel op_kernel(int l, int k) const {
        const ConvKernel& src = at(l).op;
        ConvKernel out(1, 1, 3, StrideMode::Vanilla, 1);
        for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) out.w(0, 0, ky, kx) = src.w(k, 0, ky, kx);
        return out;
    }
};

inline LevelKernels build_level_kernels(const GridLevel& level) {
    LevelKernels lk{level, ConvKernel(1, 6, 3, StrideMode::Vanilla, 1), ConvKernel(1, 6, 3, StrideMode::Vanilla, 0)};
    const StencilConstants sc = StencilConstants::compute(level.h);
    const double weight = level.h * level.h / 6.0;
    for (int k = 0; k < 6; ++k) {
        for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx)
                lk.op.w(k, 0, ky, kx) = sc.kernel[static_cast<std::size_t>(k)][static_cast<std::size_t>(ky)]
                                                [static_cast<std::size_t>(kx)];
        for (const Offset& o : adjacent_triangles()[static_cast<std::size_t>(k)]) {
            lk.kappa.w(k, 0, o.dy + 1, o.dx + 1) = weight;
        }
    }
    return lk;
}

inline ConvKernel build_transfer_kernel(StrideMode mode) {
    ConvKernel k(1, 1, 3, mode, 0);
    k.w(0, 0, 1, 1) = 1.0;
    for (const Offset& o : edge_neighbors()) k.w(0, 0, o.dy + 1, o.dx + 1) = 0.5;
    return k;
}

inline ConvKernel build_coarsen_kernel() {
    ConvKernel k(6, 6, 3, StrideMode::TwoStrided, 0);
    const auto& map = coarsening_map();
    for (int out = 0; out < 6; ++out) {
        for (const CoarseningTerm& term : map[static_cast<std::size_t>(out)]) {
            k.w(out, term.k, term.offset.dy + 1, term.offset.dx + 1) += 1.0;
        }
    }
    return k;
}

// ---------------------------------------------------------------------------
// Convolutional building blocks

/// Fine-level triangle integrals from the extended nodal coefficient: one valid 1 -> 6 convolution.
inline Tensor conv_triangle_integrals(const Vector& kappa_extended, const LevelKernels& lk) {
    return conv2d(to_tensor(kappa_extended, lk.level.extended_per_side()), lk.kappa);
}

inline Tensor conv_coarsen_integrals(const Tensor& fine, const KernelSet& ks) { return conv2d(fine, ks.coarsen_kernel); }

inline Tensor integrals_to_tensor(const TriangleIntegrals& ups) {
    std::vector<const Vector*> ch;
    for (const Vector& v : ups.channel) ch.push_back(&v);
    return stack_channels(ch, ups.level.interior_per_side());
}

inline TriangleIntegrals tensor_to_integrals(const Tensor& t, const GridLevel& level) {
    if (t.channels != 6 || t.rows != level.interior_per_side()) {
        throw std::invalid_argument("tensor_to_integrals: shape mismatch");
    }
    TriangleIntegrals out{level, {}};
    for (int k = 0; k < 6; ++k) out.channel[static_cast<std::size_t>(k)] = channel_vector(t, k);
    return out;
}

/// A u = sum_k ups_k (.) (u * K^(k)).
inline Vector conv_apply_operator(const Tensor& ups, const Vector& u, const LevelKernels& lk) {
    const int side = lk.level.interior_per_side();
    if (ups.channels != 6 || ups.rows != side || ups.cols != side) {
        throw std::invalid_argument("conv_apply_operator: integral tensor shape mismatch");
    }
    const Tensor t = conv2d(to_tensor(u, side), lk.op);
    Vector out(lk.level.dof());
    const std::size_t plane = t.plane();
    for (std::size_t i = 0; i < plane; ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < 6; ++k) acc += ups.data[k * plane + i] * t.data[k * plane + i];
        out[static_cast<Eigen::Index>(i)] = acc;
    }
    return out;
}

inline Vector conv_restrict(const Vector& fine, const GridLevel& fine_level, const KernelSet& ks) {
    return channel_vector(conv2d(to_tensor(fine, fine_level.interior_per_side()), ks.restrict_kernel));
}

inline Vector conv_prolong(const Vector& coarse, const GridLevel& coarse_level, const KernelSet& ks) {
    return channel_vector(conv2d(to_tensor(coarse, coarse_level.interior_per_side()), ks.prolong_kernel));
}

// ---------------------------------------------------------------------------
// Kernel verification

struct KernelCheckFailure : std::logic_error {
    using std::logic_error::logic_error;
};

namespace detail {

inline double rel_max_diff(const Vector& a, const Vector& b) {
    const double scale = std::max({a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min()});
    return (a - b).cwiseAbs().maxCoeff() / scale;
}

} // namespace detail

/// Check every kernel against its matrix oracle on the two coarsest levels.
inline void verify_kernel_set(const KernelSet& ks, const GridHierarchy& hier, double tol = 1e-12) {
    std::mt19937_64 rng(20240917);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    auto random_vector = [&](Eigen::Index n) {
        Vector v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = dist(rng);
        return v;
    };

    for (int l = 1; l <= std::min(2, hier.num_levels()); ++l) {
        const GridLevel& lvl = hier.level(l);
        const LevelKernels& lk = ks.at(l);
        const StencilConstants sc = StencilConstants::compute(lvl.h);
        for (int k = 0; k < 6; ++k)
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx)
                    if (lk.op.w(k, 0, ky, kx) != sc.kernel[static_cast<std::size_t>(k)][static_cast<std::size_t>(ky)]
                                                          [static_cast<std::size_t>(kx)]) {
                        throw KernelCheckFailure("operator kernel differs from the stencil constants on level " +
                                                 std::to_string(l));
                    }

        Vector kappa = Vector::Constant(lvl.extended_size(), 1.0) + 0.5 * random_vector(lvl.extended_size()).cwiseAbs();
        const Tensor ups = conv_triangle_integrals(kappa, lk);
        const Vector u = random_vector(lvl.dof());
        if (detail::rel_max_diff(conv_apply_operator(ups, u, lk), assemble_dense(kappa, lvl) * u) > tol) {
            throw KernelCheckFailure("convolutional operator differs from dense assembly on level " + std::to_string(l));
        }
        const Tensor ones = conv_triangle_integrals(Vector::Ones(lvl.extended_size()), lk);
        const double area = 0.5 * lvl.h * lvl.h;
        for (double v : ones.data) {
            if (std::abs(v - area) > tol * area) throw KernelCheckFailure("coefficient kernel does not integrate constants");
        }
    }
    if (hier.num_levels() >= 2) {
        const GridLevel& coarse = hier.level(1);
        const GridLevel& fine = hier.level(2);
        const SparseMatrix p = prolongation_matrix(hier, 1);
        const Vector c = random_vector(coarse.dof());
        const Vector f = random_vector(fine.dof());
        if (detail::rel_max_diff(conv_prolong(c, coarse, ks), p * c) > tol) {
            throw KernelCheckFailure("prolongation kernel differs from the prolongation matrix");
        }
        if (detail::rel_max_diff(conv_restrict(f, fine, ks), p.transpose() * f) > tol) {
            throw KernelCheckFailure("restriction kernel differs from the transposed prolongation matrix");
        }
        const TriangleIntegrals fine_ups = triangle_integrals(
            Vector::Ones(fine.extended_size()) + 0.5 * random_vector(fine.extended_size()).cwiseAbs(), fine);
        const TriangleIntegrals expected = coarsen_integrals(fine_ups, coarse);
        const TriangleIntegrals got = tensor_to_integrals(conv_coarsen_integrals(integrals_to_tensor(fine_ups), ks), coarse);
        for (std::size_t k = 0; k < 6; ++k) {
            if (detail::rel_max_diff(got.channel[k], expected.channel[k]) > tol) {
                throw KernelCheckFailure("coarsening kernel differs from exact re-integration");
            }
        }
    }
}

/// Build and verify all kernels of the hierarchy.
inline KernelSet build_kernel_set(const GridHierarchy& hier) {
    KernelSet ks;
    for (const GridLevel& lvl : hier.levels()) ks.levels.push_back(build_level_kernels(lvl));
    ks.restrict_kernel = build_transfer_kernel(StrideMode::TwoStrided);
    ks.prolong_kernel = build_transfer_kernel(StrideMode::TwoTransposeStrided);
    ks.coarsen_kernel = build_coarsen_kernel();
    verify_kernel_set(ks, hier);
    return ks;
}

// ---------------------------------------------------------------------------
// Convolutional multigrid

struct ConvStack {
    GridHierarchy hier;
    std::vector<Tensor> integrals;
    std::vector<double> omega;

    const Tensor& ups(int l) const { return integrals[static_cast<std::size_t>(l - 1)]; }
    double omega_at(int l) const { return omega[static_cast<std::size_t>(l - 1)]; }

    /// Integrals by convolution from the extended finest coefficient, coarsened by strided convolution.
    static ConvStack build(const Vector& kappa_fine, const GridHierarchy& hier, const KernelSet& ks,
                           const VCycleConfig& cfg) {
        cfg.validate();
        ConvStack s;
        s.hier = hier;
        const int top = hier.num_levels();
        const GridLevel& fine = hier.finest();
        const Vector ext = kappa_fine.size() == fine.extended_size() ? kappa_fine : extend_nearest(kappa_fine, fine);
        s.integrals.resize(static_cast<std::size_t>(top));
        s.integrals.back() = conv_triangle_integrals(ext, ks.at(top));
        for (int l = top - 1; l >= 1; --l) {
            s.integrals[static_cast<std::size_t>(l - 1)] = conv_coarsen_integrals(s.ups(l + 1), ks);
        }
        for (int l = 1; l <= top; ++l) {
            if (cfg.omega_mode == OmegaMode::Fixed) {
                s.omega.push_back(cfg.omega);
                continue;
            }
            const LevelKernels& lk = ks.at(l);
            const double lambda = power_iteration_lambda_max(
                [&](const Vector& x) { return conv_apply_operator(s.ups(l), x, lk); }, power_iteration_start(lk.level));
            if (!(lambda > 0.0)) throw std::runtime_error("conv stack: operator is not positive");
            s.omega.push_back(kOmegaSafety / lambda);
        }
        return s;
    }
};

inline Vector conv_richardson(Vector u, const Vector& f, const Tensor& ups, const LevelKernels& lk, double omega,
                              int steps) {
    for (int s = 0; s < steps; ++s) {
        const Vector au = conv_apply_operator(ups, u, lk);
        u += omega * (f - au);
    }
    return u;
}

inline Vector conv_v_cycle(Vector u, const Vector& f, const ConvStack& stack, const KernelSet& ks,
                           const VCycleConfig& cfg, int l) {
    if (cfg.k0 < 1) throw std::invalid_argument("conv_v_cycle: the convolutional path needs k0 >= 1 coarse steps");
    const LevelKernels& lk = ks.at(l);
    detail::check_size(u, lk.level.dof(), "conv_v_cycle iterate");
    if (l == 1) return conv_richardson(std::move(u), f, stack.ups(1), lk, stack.omega_at(1), cfg.k0);

    const double omega = stack.omega_at(l);
    u = conv_richardson(std::move(u), f, stack.ups(l), lk, omega, cfg.k_pre);
    const Vector residual = f - conv_apply_operator(stack.ups(l), u, lk);
    const Vector coarse_residual = conv_restrict(residual, lk.level, ks);
    const Vector correction =
        conv_v_cycle(Vector::Zero(coarse_residual.size()), coarse_residual, stack, ks, cfg, l - 1);
    u += conv_prolong(correction, ks.at(l - 1).level, ks);
    return conv_richardson(std::move(u), f, stack.ups(l), lk, omega, cfg.k_post);
}

inline Vector conv_mg_solve(const Vector& u0, const Vector& kappa_fine, const Vector& f, const VCycleConfig& cfg,
                            const GridHierarchy& hier, const KernelSet& ks) {
    const ConvStack stack = ConvStack::build(kappa_fine, hier, ks, cfg);
    Vector u = u0;
    for (int i = 0; i < cfg.m; ++i) u = conv_v_cycle(std::move(u), f, stack, ks, cfg, hier.num_levels());
    return u;
}

// ---------------------------------------------------------------------------
// Approximate multiplication unit

enum class Activation { Softplus, ShiftedSoftplus };

inline double activate(Activation a, double t) {
    // log(1 + e^t), stable for large |t|
    const double sp = t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
    return a == Activation::ShiftedSoftplus ? sp - 0.69314718055994530942 : sp;
}

/// Second derivative of softplus (shared by the shifted variant): s(t)(1 - s(t)), s the logistic function.
inline double activation_second_derivative(Activation, double t) {
    const double s = 1.0 / (1.0 + std::exp(-t));
    return s * (1.0 - s);
}

/// Two-layer CNN with 1x1 kernels approximating the product of its two input channels:
///   x y ~ (rho(x0 + l(x+y)) - rho(x0 + l x) - rho(x0 + l y) + rho(x0)) / (l^2 rho''(x0)).
/// Layer one maps (x, y) to three channels, layer two combines them. Biases are only
/// instantiated where they are non-zero: with the shifted softplus at x0 = 0 the unit has
/// 6 + 3 = 9 weights.
struct MulUnit {
    Activation activation = Activation::ShiftedSoftplus;
    double x0 = 0.0;
    double lambda = 0.0;
    double bound = 1.0;
    double epsilon = 0.0;
    double achieved_error = 0.0;
    ConvKernel layer1;
    ConvKernel layer2;

    int layers() const { return 2; }
    int weight_count() const { return static_cast<int>(layer1.parameter_count() + layer2.parameter_count()); }
};

inline MulUnit make_mul_unit(double lambda, double bound, Activation act = Activation::ShiftedSoftplus, double x0 = 0.0) {
    MulUnit u;
    u.activation = act;
    u.x0 = x0;
    u.lambda = lambda;
    u.bound = bound;
    u.layer1 = ConvKernel(2, 3, 1, StrideMode::Vanilla, 0);
    u.layer1.w(0, 0, 0, 0) = lambda;
    u.layer1.w(0, 1, 0, 0) = lambda;
    u.layer1.w(1, 0, 0, 0) = lambda;
    u.layer2 = ConvKernel(3, 1, 1, StrideMode::Vanilla, 0);
    u.layer1.w(2, 1, 0, 0) = lambda;
    if (x0 != 0.0) u.layer1.bias.assign(3, x0);
    const double scale = 1.0 / (lambda * lambda * activation_second_derivative(act, x0));
    u.layer2.w(0, 0, 0, 0) = scale;
    u.layer2.w(0, 1, 0, 0) = -scale;
    u.layer2.w(0, 2, 0, 0) = -scale;
    const double rho0 = activate(act, x0);
    if (rho0 != 0.0) u.layer2.bias.assign(1, rho0 * scale);
    return u;
}

/// Elementwise approximate product of two equally shaped single-channel tensors.
inline Tensor mul_apply(const MulUnit& unit, const Tensor& x, const Tensor& y) {
    if (x.channels != 1 || y.channels != 1 || x.rows != y.rows || x.cols != y.cols) {
        throw std::invalid_argument("mul_apply: inputs must be single-channel tensors of equal shape");
    }
    Tensor in(2, x.rows, x.cols);
    std::copy(x.data.begin(), x.data.end(), in.data.begin());
    std::copy(y.data.begin(), y.data.end(), in.data.begin() + static_cast<std::ptrdiff_t>(in.plane()));
    Tensor hidden = conv2d(in, unit.layer1);
    for (double& v : hidden.data) v = activate(unit.activation, v);
    return conv2d(hidden, unit.layer2);
}

inline constexpr int kMulGridPoints = 401;

/// Sup error of the unit against x*y on the kMulGridPoints^2 grid of [-B, B]^2.
inline double mul_unit_sup_error(const MulUnit& unit) {
    const int n = kMulGridPoints;
    Tensor x(1, n, n);
    Tensor y(1, n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            x.at(0, i, j) = -unit.bound + 2.0 * unit.bound * i / (n - 1);
            y.at(0, i, j) = -unit.bound + 2.0 * unit.bound * j / (n - 1);
        }
    }
    const Tensor z = mul_apply(unit, x, y);
    double err = 0.0;
    for (std::size_t i = 0; i < z.data.size(); ++i) err = std::max(err, std::abs(z.data[i] - x.data[i] * y.data[i]));
    return err;
}

struct MulUnitError : std::runtime_error {
    double best_error;
    MulUnitError(const std::string& what, double best) : std::runtime_error(what), best_error(best) {}
};

/// Largest lambda (bisection in log scale) whose grid sup error stays <= epsilon.
inline MulUnit build_mul_unit(double bound, double epsilon, Activation act = Activation::ShiftedSoftplus,
                              double x0 = 0.0) {
    if (!(bound > 0.0)) throw std::invalid_argument("build_mul_unit: bound must be positive");
    if (!(epsilon > 0.0) || !(epsilon < 0.5)) throw std::invalid_argument("build_mul_unit: epsilon must lie in (0, 1/2)");
    if (activation_second_derivative(act, x0) == 0.0) throw std::invalid_argument("build_mul_unit: rho''(x0) vanishes");

    auto error_at = [&](double lambda) { return mul_unit_sup_error(make_mul_unit(lambda, bound, act, x0)); };
    double hi = 1.0 / bound;
    double err_hi = error_at(hi);
    if (err_hi <= epsilon) {
        MulUnit u = make_mul_unit(hi, bound, act, x0);
        u.epsilon = epsilon;
        u.achieved_error = err_hi;
        return u;
    }
    double lo = hi;
    double err_lo = err_hi;
    while (err_lo > epsilon) {
        lo *= 0.25;
        err_lo = error_at(lo);
        if (lo < 1e-8) throw MulUnitError("build_mul_unit: epsilon unreachable in floating point", err_lo);
    }
    for (int it = 0; it < 40; ++it) {
        const double mid = std::sqrt(lo * hi);
        const double e = error_at(mid);
        if (e <= epsilon) {
            lo = mid;
            err_lo = e;
        } else {
            hi = mid;
        }
    }
    MulUnit u = make_mul_unit(lo, bound, act, x0);
    u.epsilon = epsilon;
    u.achieved_error = err_lo;
    return u;
}

/// Operator application with every pointwise product replaced by the multiplication unit.
inline Vector approx_conv_apply_operator(const Tensor& ups, const Vector& u, const LevelKernels& lk, const MulUnit& unit) {
    const int side = lk.level.interior_per_side();
    if (ups.channels != 6 || ups.rows != side || ups.cols != side) {
        throw std::invalid_argument("approx_conv_apply_operator: integral tensor shape mismatch");
    }
    const Tensor t = conv2d(to_tensor(u, side), lk.op);
    const std::size_t plane = t.plane();
    for (std::size_t i = 0; i < t.data.size(); ++i) {
        if (std::abs(t.data[i]) > unit.bound || std::abs(ups.data[i]) > unit.bound) {
            throw std::domain_error("approx_conv_apply_operator: input exceeds the multiplication unit bound " +
                                    std::to_string(unit.bound));
        }
    }
    Vector out = Vector::Zero(lk.level.dof());
    for (std::size_t k = 0; k < 6; ++k) {
        Tensor a(1, side, side);
        Tensor b(1, side, side);
        std::copy(ups.data.begin() + static_cast<std::ptrdiff_t>(k * plane),
                  ups.data.begin() + static_cast<std::ptrdiff_t>((k + 1) * plane), a.data.begin());
        std::copy(t.data.begin() + static_cast<std::ptrdiff_t>(k * plane),
                  t.data.begin() + static_cast<std::ptrdiff_t>((k + 1) * plane), b.data.begin());
        out += channel_vector(mul_apply(unit, a, b));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Weight counting

/// Parameter budget of the unrolled convolutional multigrid network.
struct WeightBudget {
    std::size_t op_kernel = 0;     // u -> six stencil channels
    std::size_t mul_unit = 0;      // one multiplication unit
    std::size_t channel_sum = 0;   // 1x1, six products -> A u
    std::size_t smoothing_mix = 0; // 1x1, (u, f, A u) -> u + w (f - A u)
    std::size_t residual_mix = 0;  // 1x1, (f, A u) -> f - A u
    std::size_t restrict_kernel = 0;
    std::size_t prolong_kernel = 0;
    std::size_t correction_add = 0; // 1x1, (u, P e) -> u + P e
    std::size_t kappa_kernel = 0;
    std::size_t coarsen_kernel = 0;
    std::size_t output = 0; // 1x1, selects u

    std::size_t operator_apply() const { return op_kernel + 6 * mul_unit + channel_sum; }
    std::size_t smoothing_step() const { return operator_apply() + smoothing_mix; }
    std::size_t residual() const { return operator_apply() + residual_mix; }
    std::size_t transfer() const { return residual() + restrict_kernel + prolong_kernel + correction_add; }

    static WeightBudget from_kernels(const KernelSet& ks, const MulUnit& unit) {
        WeightBudget b;
        b.op_kernel = ks.levels.front().op.parameter_count();
        b.mul_unit = static_cast<std::size_t>(unit.weight_count());
        b.channel_sum = ConvKernel(6, 1, 1, StrideMode::Vanilla, 0).parameter_count();
        b.smoothing_mix = ConvKernel(3, 1, 1, StrideMode::Vanilla, 0).parameter_count();
        b.residual_mix = ConvKernel(2, 1, 1, StrideMode::Vanilla, 0).parameter_count();
        b.restrict_kernel = ks.restrict_kernel.parameter_count();
        b.prolong_kernel = ks.prolong_kernel.parameter_count();
        b.correction_add = ConvKernel(2, 1, 1, StrideMode::Vanilla, 0).parameter_count();
        b.kappa_kernel = ks.levels.front().kappa.parameter_count();
        b.coarsen_kernel = ks.coarsen_kernel.parameter_count();
        b.output = ConvKernel(1, 1, 1, StrideMode::Vanilla, 0).parameter_count();
        return b;
    }

    /// Budget of the canonical kernels (independent of mesh size and epsilon).
    static WeightBudget canonical() {
        static const WeightBudget b = [] {
            const GridHierarchy hier(2, 2);
            return from_kernels(build_kernel_set(hier), make_mul_unit(0.1, 1.0));
        }();
        return b;
    }
};

/// Parameters of one V-cycle on `levels` levels; a coarse-correction branch is only
/// instantiated when the cycle below it does any work.
inline std::size_t count_cycle_weights(int levels, int k_pre, int k_post, int k0, const WeightBudget& b) {
    std::size_t total = static_cast<std::size_t>(k0) * b.smoothing_step();
    bool below_works = k0 > 0;
    for (int l = 2; l <= levels; ++l) {
        total += static_cast<std::size_t>(k_pre + k_post) * b.smoothing_step();
        if (below_works) total += b.transfer();
        below_works = below_works || (k_pre + k_post) > 0;
    }
    return total;
}

/// Weights of the network: coefficient integration and coarsening, m unrolled V-cycles, output.
inline std::size_t count_weights(int levels, int k, int k0, int m, const WeightBudget& b = WeightBudget::canonical()) {
    if (levels < 1 || k < 0 || k0 < 0 || m < 0) throw std::invalid_argument("count_weights: invalid arguments");
    const std::size_t plumbing =
        b.kappa_kernel + static_cast<std::size_t>(levels - 1) * b.coarsen_kernel + b.output;
    return plumbing + static_cast<std::size_t>(m) * count_cycle_weights(levels, k, k, k0, b);
}

} // namespace mgconv
