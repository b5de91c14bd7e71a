#pragma once

// P1 finite-element quantities on one grid level.
//
// The operator is never assembled on the hot path: A u is evaluated from the
// six per-vertex triangle integrals of the coefficient and six 3x3 stencils.
// The element-loop assemblers below are the reference route and only used to
// check that path (and for direct coarse / reference solves).

#include "mgconv/grid.hpp"

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mgconv {

using DenseMatrix = Eigen::MatrixXd;

/// 3x3 stencil, entry [dy + 1][dx + 1].
using Stencil3 = std::array<std::array<double, 3>, 3>;

/// Per-vertex integrals of the coefficient over the six adjacent triangles.
struct TriangleIntegrals {
    GridLevel level;
    std::array<Vector, 6> channel;

    double at(int k, int ix, int iy) const { return channel[static_cast<std::size_t>(k)][level.index(ix, iy)]; }
};

namespace detail {

inline void check_size(const Vector& v, Eigen::Index expected, const char* what) {
    if (v.size() != expected) {
        throw std::invalid_argument(std::string("dimension mismatch for ") + what + ": expected " +
                                    std::to_string(expected) + " entries, got " + std::to_string(v.size()));
    }
}

/// Gradients of the three barycentric functions of a triangle.
inline std::array<Eigen::Vector2d, 3> barycentric_gradients(const std::array<Eigen::Vector2d, 3>& p, double& area) {
    const Eigen::Vector2d e1 = p[1] - p[0];
    const Eigen::Vector2d e2 = p[2] - p[0];
    const double det = e1.x() * e2.y() - e1.y() * e2.x();
    area = 0.5 * std::abs(det);
    std::array<Eigen::Vector2d, 3> g;
    // grad(lambda_i) = rot90(opposite edge) / det
    for (int i = 0; i < 3; ++i) {
        const Eigen::Vector2d& a = p[static_cast<std::size_t>((i + 1) % 3)];
        const Eigen::Vector2d& b = p[static_cast<std::size_t>((i + 2) % 3)];
        g[static_cast<std::size_t>(i)] = Eigen::Vector2d(a.y() - b.y(), b.x() - a.x()) / det;
    }
    return g;
}

} // namespace detail

/// Constant values of <grad phi_center, grad phi_{center+offset}> on each adjacent triangle.
struct StencilConstants {
    std::array<Stencil3, 6> kernel{};

    static StencilConstants compute(double h) {
        StencilConstants c;
        for (std::size_t k = 0; k < 6; ++k) {
            const TriangleOffsets& tri = adjacent_triangles()[k];
            std::array<Eigen::Vector2d, 3> p;
            for (std::size_t v = 0; v < 3; ++v) p[v] = Eigen::Vector2d(tri[v].dx * h, tri[v].dy * h);
            double area = 0.0;
            const auto g = detail::barycentric_gradients(p, area);
            for (std::size_t v = 0; v < 3; ++v) {
                c.kernel[k][static_cast<std::size_t>(tri[v].dy + 1)][static_cast<std::size_t>(tri[v].dx + 1)] =
                    g[0].dot(g[v]);
            }
        }
        return c;
    }
};

/// Extend interior nodal values to the (cells+1)^2 vertex lattice by copying the nearest interior value.
inline Vector extend_nearest(const Vector& interior, const GridLevel& level) {
    detail::check_size(interior, level.dof(), "interior field");
    const int m = level.interior_per_side();
    const int e = level.extended_per_side();
    Vector out(level.extended_size());
    for (int ey = 0; ey < e; ++ey) {
        const int iy = std::clamp(ey - 1, 0, m - 1);
        for (int ex = 0; ex < e; ++ex) {
            const int ix = std::clamp(ex - 1, 0, m - 1);
            out[ey * e + ex] = interior[level.index(ix, iy)];
        }
    }
    return out;
}

/// Exact integrals of the P1 interpolant of kappa over the six triangles around every interior vertex.
/// `kappa` is either the extended field ((cells+1)^2) or interior-only (extended by nearest value).
inline TriangleIntegrals triangle_integrals(const Vector& kappa, const GridLevel& level) {
    if (kappa.size() == level.dof() && kappa.size() != level.extended_size()) {
        return triangle_integrals(extend_nearest(kappa, level), level);
    }
    detail::check_size(kappa, level.extended_size(), "extended coefficient");
    const int m = level.interior_per_side();
    const int e = level.extended_per_side();
    const double weight = level.h * level.h / 6.0; // area / 3
    TriangleIntegrals out{level, {}};
    for (std::size_t k = 0; k < 6; ++k) {
        const TriangleOffsets& tri = adjacent_triangles()[k];
        Vector& ch = out.channel[k];
        ch.resize(level.dof());
        for (int iy = 0; iy < m; ++iy) {
            for (int ix = 0; ix < m; ++ix) {
                double s = 0.0;
                for (const Offset& o : tri) s += kappa[(iy + 1 + o.dy) * e + (ix + 1 + o.dx)];
                ch[level.index(ix, iy)] = weight * s;
            }
        }
    }
    return out;
}

/// A u evaluated as six zero-padded stencil passes, each scaled pointwise by one integral channel.
inline Vector apply_operator(const TriangleIntegrals& ups, const StencilConstants& stencils, const Vector& u) {
    const GridLevel& level = ups.level;
    detail::check_size(u, level.dof(), "operator input");
    const int m = level.interior_per_side();
    Vector out(level.dof());
    for (int iy = 0; iy < m; ++iy) {
        for (int ix = 0; ix < m; ++ix) {
            const int v = level.index(ix, iy);
            double acc = 0.0;
            for (std::size_t k = 0; k < 6; ++k) {
                const Stencil3& K = stencils.kernel[k];
                double s = 0.0;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (level.is_interior(ix + dx, iy + dy)) {
                            s += K[static_cast<std::size_t>(dy + 1)][static_cast<std::size_t>(dx + 1)] *
                                 u[level.index(ix + dx, iy + dy)];
                        }
                    }
                }
                acc += ups.channel[k][v] * s;
            }
            out[v] = acc;
        }
    }
    return out;
}

inline Vector apply_operator(const TriangleIntegrals& ups, const Vector& u) {
    return apply_operator(ups, StencilConstants::compute(ups.level.h), u);
}

// ---------------------------------------------------------------------------
// Element-loop assembly (reference route)

/// One mesh triangle: extended-lattice vertex coordinates (ex, ey).
struct MeshTriangle {
    std::array<Offset, 3> vertex;
};

/// Visit all 2 * cells^2 triangles of the level.
inline void for_each_triangle(const GridLevel& level, const std::function<void(const MeshTriangle&)>& visit) {
    for (int cy = 0; cy < level.cells; ++cy) {
        for (int cx = 0; cx < level.cells; ++cx) {
            visit(MeshTriangle{{Offset{cx, cy}, Offset{cx + 1, cy}, Offset{cx + 1, cy + 1}}});
            visit(MeshTriangle{{Offset{cx, cy}, Offset{cx + 1, cy + 1}, Offset{cx, cy + 1}}});
        }
    }
}

/// Integral of the triangle's coefficient looked up from the per-vertex table.
/// Returns false when no vertex of the triangle is interior.
inline bool lookup_triangle_integral(const TriangleIntegrals& ups, const MeshTriangle& t, double& value) {
    for (const Offset& v : t.vertex) {
        const int ix = v.dx - 1;
        const int iy = v.dy - 1;
        if (!ups.level.is_interior(ix, iy)) continue;
        for (std::size_t k = 0; k < 6; ++k) {
            const TriangleOffsets& tri = adjacent_triangles()[k];
            int matched = 0;
            for (const Offset& o : tri) {
                const Offset w{v.dx + o.dx, v.dy + o.dy};
                for (const Offset& q : t.vertex) matched += (q == w) ? 1 : 0;
            }
            if (matched == 3) {
                value = ups.channel[k][ups.level.index(ix, iy)];
                return true;
            }
        }
    }
    return false;
}

/// Local assembly callback: (row, col, value) for interior rows/cols only.
inline void assemble_elements(const GridLevel& level, const std::function<double(const MeshTriangle&)>& integral,
                              bool stiffness, const std::function<void(int, int, double)>& add) {
    for_each_triangle(level, [&](const MeshTriangle& t) {
        std::array<Eigen::Vector2d, 3> p;
        std::array<int, 3> dofs{};
        bool any = false;
        for (std::size_t v = 0; v < 3; ++v) {
            p[v] = Eigen::Vector2d(level.coordinate(t.vertex[v].dx), level.coordinate(t.vertex[v].dy));
            const int ix = t.vertex[v].dx - 1;
            const int iy = t.vertex[v].dy - 1;
            dofs[v] = level.is_interior(ix, iy) ? level.index(ix, iy) : -1;
            any = any || dofs[v] >= 0;
        }
        if (!any) return;
        double area = 0.0;
        const auto g = detail::barycentric_gradients(p, area);
        const double w = integral(t);
        for (std::size_t a = 0; a < 3; ++a) {
            if (dofs[a] < 0) continue;
            for (std::size_t b = 0; b < 3; ++b) {
                if (dofs[b] < 0) continue;
                // stiffness: w = int kappa; mass: w = area, local matrix area/12 * (1 + delta_ab)
                const double val = stiffness ? w * g[a].dot(g[b]) : w * (a == b ? 2.0 : 1.0) / 12.0;
                add(dofs[a], dofs[b], val);
            }
        }
    });
}

namespace detail {

inline std::function<double(const MeshTriangle&)> nodal_triangle_integral(const Vector& kappa_ext,
                                                                          const GridLevel& level) {
    const int e = level.extended_per_side();
    const double weight = level.h * level.h / 6.0;
    return [&kappa_ext, e, weight](const MeshTriangle& t) {
        double s = 0.0;
        for (const Offset& v : t.vertex) s += kappa_ext[v.dy * e + v.dx];
        return weight * s;
    };
}

inline Vector as_extended(const Vector& kappa, const GridLevel& level) {
    if (kappa.size() == level.extended_size()) return kappa;
    return extend_nearest(kappa, level);
}

inline constexpr int kDenseGuard = 10000;

inline void check_dense_guard(const GridLevel& level) {
    if (level.dof() > kDenseGuard) {
        throw std::length_error("dense assembly refused: " + std::to_string(level.dof()) + " rows exceed the guard of " +
                                std::to_string(kDenseGuard));
    }
}

} // namespace detail

/// Dense stiffness matrix (a(phi_j, phi_i)) for a nodal coefficient; reference use only.
inline DenseMatrix assemble_dense(const Vector& kappa, const GridLevel& level) {
    detail::check_dense_guard(level);
    const Vector ext = detail::as_extended(kappa, level);
    DenseMatrix a = DenseMatrix::Zero(level.dof(), level.dof());
    assemble_elements(level, detail::nodal_triangle_integral(ext, level), true,
                      [&a](int i, int j, double v) { a(i, j) += v; });
    return a;
}

/// Dense stiffness matrix built from a triangle-integral table.
inline DenseMatrix assemble_dense(const TriangleIntegrals& ups) {
    detail::check_dense_guard(ups.level);
    DenseMatrix a = DenseMatrix::Zero(ups.level.dof(), ups.level.dof());
    assemble_elements(
        ups.level,
        [&ups](const MeshTriangle& t) {
            double v = 0.0;
            return lookup_triangle_integral(ups, t, v) ? v : 0.0;
        },
        true, [&a](int i, int j, double v) { a(i, j) += v; });
    return a;
}

inline SparseMatrix triplets_to_sparse(int n, std::vector<Eigen::Triplet<double>>& entries) {
    SparseMatrix s(n, n);
    s.setFromTriplets(entries.begin(), entries.end());
    return s;
}

/// Sparse stiffness matrix for a nodal coefficient (same element loop as assemble_dense).
inline SparseMatrix assemble_sparse(const Vector& kappa, const GridLevel& level) {
    const Vector ext = detail::as_extended(kappa, level);
    std::vector<Eigen::Triplet<double>> entries;
    assemble_elements(level, detail::nodal_triangle_integral(ext, level), true,
                      [&entries](int i, int j, double v) { entries.emplace_back(i, j, v); });
    return triplets_to_sparse(level.dof(), entries);
}

inline SparseMatrix assemble_sparse(const TriangleIntegrals& ups) {
    std::vector<Eigen::Triplet<double>> entries;
    assemble_elements(
        ups.level,
        [&ups](const MeshTriangle& t) {
            double v = 0.0;
            return lookup_triangle_integral(ups, t, v) ? v : 0.0;
        },
        true, [&entries](int i, int j, double v) { entries.emplace_back(i, j, v); });
    return triplets_to_sparse(ups.level.dof(), entries);
}

/// Load vector of a constant source: f * int(phi_i) = f * h^2.
inline Vector rhs_vector(const GridLevel& level, double f) {
    return Vector::Constant(level.dof(), f * level.h * level.h);
}

inline SparseMatrix l2_mass_matrix(const GridLevel& level) {
    std::vector<Eigen::Triplet<double>> entries;
    const double area = 0.5 * level.h * level.h;
    assemble_elements(
        level, [area](const MeshTriangle&) { return area; }, false,
        [&entries](int i, int j, double v) { entries.emplace_back(i, j, v); });
    return triplets_to_sparse(level.dof(), entries);
}

/// H^1 Gram matrix of the hat functions: L2 mass plus unit-coefficient stiffness.
inline SparseMatrix h1_mass_matrix(const GridLevel& level) {
    SparseMatrix m = l2_mass_matrix(level);
    m += assemble_sparse(Vector::Ones(level.extended_size()), level);
    return m;
}

/// Caches the per-level Gram matrices for repeated norm evaluation.
class NormEvaluator {
public:
    explicit NormEvaluator(const GridLevel& level)
        : level_(level), h1_(h1_mass_matrix(level)), l2_(l2_mass_matrix(level)) {}

    const GridLevel& level() const { return level_; }
    const SparseMatrix& h1_matrix() const { return h1_; }
    const SparseMatrix& l2_matrix() const { return l2_; }

    double h1_squared(const Vector& u) const {
        detail::check_size(u, level_.dof(), "norm input");
        return u.dot(h1_ * u);
    }
    double l2_squared(const Vector& u) const {
        detail::check_size(u, level_.dof(), "norm input");
        return u.dot(l2_ * u);
    }
    double h1(const Vector& u) const { return std::sqrt(std::max(0.0, h1_squared(u))); }
    double l2(const Vector& u) const { return std::sqrt(std::max(0.0, l2_squared(u))); }

private:
    GridLevel level_;
    SparseMatrix h1_;
    SparseMatrix l2_;
};

inline double h1_norm(const Vector& u, const GridLevel& level) { return NormEvaluator(level).h1(u); }
inline double l2_norm(const Vector& u, const GridLevel& level) { return NormEvaluator(level).l2(u); }

// ---------------------------------------------------------------------------
// Coarsening of triangle integrals

/// One fine contribution to a coarse triangle integral: the fine triangle `k` of the
/// fine vertex at `offset` from the coarse-aligned fine vertex.
struct CoarseningTerm {
    Offset offset;
    int k = 0;
};

/// For each coarse triangle, the four fine sub-triangles that tile it.
inline const std::array<std::array<CoarseningTerm, 4>, 6>& coarsening_map() {
    static const auto table = [] {
        std::array<std::array<CoarseningTerm, 4>, 6> out{};
        for (std::size_t k = 0; k < 6; ++k) {
            const TriangleOffsets& tri = adjacent_triangles()[k];
            const Offset o1 = tri[1];
            const Offset o2 = tri[2];
            const Offset mid{o1.dx + o2.dx, o1.dy + o2.dy};
            const std::array<std::array<Offset, 3>, 4> subs = {{
                {Offset{0, 0}, o1, o2},
                {o1, Offset{2 * o1.dx, 2 * o1.dy}, mid},
                {o2, mid, Offset{2 * o2.dx, 2 * o2.dy}},
                {o1, mid, o2},
            }};
            for (std::size_t s = 0; s < 4; ++s) {
                bool found = false;
                for (const Offset& anchor : subs[s]) {
                    if (std::abs(anchor.dx) > 1 || std::abs(anchor.dy) > 1) continue;
                    for (std::size_t kk = 0; kk < 6 && !found; ++kk) {
                        int matched = 0;
                        for (const Offset& o : adjacent_triangles()[kk]) {
                            const Offset w{anchor.dx + o.dx, anchor.dy + o.dy};
                            for (const Offset& q : subs[s]) matched += (q == w) ? 1 : 0;
                        }
                        if (matched == 3) {
                            out[k][s] = CoarseningTerm{anchor, static_cast<int>(kk)};
                            found = true;
                        }
                    }
                    if (found) break;
                }
                if (!found) throw std::logic_error("coarsening map: sub-triangle without a local anchor");
            }
        }
        return out;
    }();
    return table;
}

/// Exact coarse-level integrals from fine-level integrals (fine level must be the dyadic refinement of `coarse`).
inline TriangleIntegrals coarsen_integrals(const TriangleIntegrals& fine, const GridLevel& coarse) {
    if (fine.level.cells != 2 * coarse.cells) {
        throw std::invalid_argument("coarsen_integrals: levels are not a dyadic pair");
    }
    const int mc = coarse.interior_per_side();
    TriangleIntegrals out{coarse, {}};
    for (std::size_t k = 0; k < 6; ++k) {
        Vector& ch = out.channel[k];
        ch.resize(coarse.dof());
        for (int b = 0; b < mc; ++b) {
            for (int a = 0; a < mc; ++a) {
                const int fx = coarse_to_fine_index(a);
                const int fy = coarse_to_fine_index(b);
                double s = 0.0;
                for (const CoarseningTerm& term : coarsening_map()[k]) {
                    s += fine.at(term.k, fx + term.offset.dx, fy + term.offset.dy);
                }
                ch[coarse.index(a, b)] = s;
            }
        }
    }
    return out;
}

/// Integrals on every level 1..L from the finest-level nodal coefficient.
inline std::vector<TriangleIntegrals> integral_hierarchy(const Vector& kappa_fine, const GridHierarchy& hier) {
    std::vector<TriangleIntegrals> out(static_cast<std::size_t>(hier.num_levels()));
    out.back() = triangle_integrals(kappa_fine, hier.finest());
    for (int l = hier.num_levels() - 1; l >= 1; --l) {
        out[static_cast<std::size_t>(l - 1)] = coarsen_integrals(out[static_cast<std::size_t>(l)], hier.level(l));
    }
    return out;
}

} // namespace mgconv
