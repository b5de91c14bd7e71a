#pragma once

// Nested dyadic hierarchy of uniform square meshes on [0,1]^2.
//
// Every square cell is split by the diagonal from its lower-left to its
// upper-right corner. Only interior vertices carry degrees of freedom; they
// are enumerated row-major (x fastest), so a coefficient vector of length
// dof() is a (m x m) image with m = cells - 1 interior vertices per side.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mgconv {

using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

struct Offset {
    int dx = 0;
    int dy = 0;

    friend bool operator==(const Offset&, const Offset&) = default;
};

/// Vertex offsets of one triangle adjacent to a vertex; entry 0 is always {0,0}.
using TriangleOffsets = std::array<Offset, 3>;

/// The six triangles around a vertex, counterclockwise starting east-northeast.
inline const std::array<TriangleOffsets, 6>& adjacent_triangles() {
    static const std::array<TriangleOffsets, 6> table = {{
        {{{0, 0}, {1, 0}, {1, 1}}},
        {{{0, 0}, {1, 1}, {0, 1}}},
        {{{0, 0}, {0, 1}, {-1, 0}}},
        {{{0, 0}, {-1, 0}, {-1, -1}}},
        {{{0, 0}, {-1, -1}, {0, -1}}},
        {{{0, 0}, {0, -1}, {1, 0}}},
    }};
    return table;
}

/// Offsets of the vertices connected to a vertex by a mesh edge.
inline const std::array<Offset, 6>& edge_neighbors() {
    static const std::array<Offset, 6> table = {{{1, 0}, {1, 1}, {0, 1}, {-1, 0}, {-1, -1}, {0, -1}}};
    return table;
}

struct GridLevel {
    int level = 1;
    int cells = 2;
    double h = 0.5;

    int interior_per_side() const { return cells - 1; }
    int dof() const { return interior_per_side() * interior_per_side(); }
    int extended_per_side() const { return cells + 1; }
    int extended_size() const { return extended_per_side() * extended_per_side(); }

    int index(int ix, int iy) const { return iy * interior_per_side() + ix; }
    bool is_interior(int ix, int iy) const {
        const int m = interior_per_side();
        return ix >= 0 && iy >= 0 && ix < m && iy < m;
    }

    /// Coordinate of grid line i (0 and cells are the boundary).
    double coordinate(int i) const { return static_cast<double>(i) / static_cast<double>(cells); }
};

class GridHierarchy {
public:
    GridHierarchy() = default;

    GridHierarchy(int coarse_cells, int num_levels) : coarse_cells_(coarse_cells) {
        if (coarse_cells < 2) {
            throw std::invalid_argument("coarse_cells must be >= 2 (no interior vertex otherwise)");
        }
        if (num_levels < 1) {
            throw std::invalid_argument("number of levels must be >= 1");
        }
        levels_.reserve(static_cast<std::size_t>(num_levels));
        int cells = coarse_cells;
        for (int l = 1; l <= num_levels; ++l) {
            levels_.push_back(GridLevel{l, cells, 1.0 / static_cast<double>(cells)});
            cells *= 2;
        }
    }

    int num_levels() const { return static_cast<int>(levels_.size()); }
    int coarse_cells() const { return coarse_cells_; }

    /// 1-based level access.
    const GridLevel& level(int l) const {
        if (l < 1 || l > num_levels()) {
            throw std::out_of_range("grid level " + std::to_string(l) + " out of range [1, " +
                                    std::to_string(num_levels()) + "]");
        }
        return levels_[static_cast<std::size_t>(l - 1)];
    }
    const GridLevel& finest() const { return levels_.back(); }
    const std::vector<GridLevel>& levels() const { return levels_; }

    /// Hierarchy restricted to levels 1..l.
    GridHierarchy truncated(int l) const {
        level(l);
        return GridHierarchy(coarse_cells_, l);
    }

private:
    int coarse_cells_ = 0;
    std::vector<GridLevel> levels_;
};

inline GridHierarchy build_hierarchy(int coarse_cells, int num_levels) {
    return GridHierarchy(coarse_cells, num_levels);
}

/// Fine interior index of the vertex that coincides with coarse interior index a.
inline constexpr int coarse_to_fine_index(int a) { return 2 * a + 1; }

/// Prolongation P_l : V_l -> V_{l+1}, the matrix of the canonical embedding.
inline SparseMatrix prolongation_matrix(const GridHierarchy& hier, int l) {
    if (l < 1 || l > hier.num_levels() - 1) {
        throw std::out_of_range("prolongation level " + std::to_string(l) + " out of range [1, " +
                                std::to_string(hier.num_levels() - 1) + "]");
    }
    const GridLevel& coarse = hier.level(l);
    const GridLevel& fine = hier.level(l + 1);
    const int mc = coarse.interior_per_side();

    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(static_cast<std::size_t>(coarse.dof()) * 7);
    for (int b = 0; b < mc; ++b) {
        for (int a = 0; a < mc; ++a) {
            const int col = coarse.index(a, b);
            const int fx = coarse_to_fine_index(a);
            const int fy = coarse_to_fine_index(b);
            entries.emplace_back(fine.index(fx, fy), col, 1.0);
            for (const Offset& o : edge_neighbors()) {
                // always interior: neighbors of a coarse-aligned fine vertex
                entries.emplace_back(fine.index(fx + o.dx, fy + o.dy), col, 0.5);
            }
        }
    }
    SparseMatrix p(fine.dof(), coarse.dof());
    p.setFromTriplets(entries.begin(), entries.end());
    return p;
}

inline std::vector<SparseMatrix> prolongation_matrices(const GridHierarchy& hier) {
    std::vector<SparseMatrix> out;
    for (int l = 1; l < hier.num_levels(); ++l) {
        out.push_back(prolongation_matrix(hier, l));
    }
    return out;
}

/// Subsample a level-`from` vector at the vertices shared with level `to`.
inline Vector nodal_interpolate_to_coarse(const GridHierarchy& hier, int from, int to, const Vector& u) {
    if (to > from) {
        throw std::invalid_argument("nodal interpolation goes from a finer to a coarser level");
    }
    const GridLevel& fine = hier.level(from);
    const GridLevel& coarse = hier.level(to);
    if (u.size() != fine.dof()) {
        throw std::invalid_argument("dimension mismatch: expected " + std::to_string(fine.dof()) +
                                    " entries, got " + std::to_string(u.size()));
    }
    const int stride = 1 << (from - to);
    const int mc = coarse.interior_per_side();
    Vector out(coarse.dof());
    for (int b = 0; b < mc; ++b) {
        for (int a = 0; a < mc; ++a) {
            out[coarse.index(a, b)] = u[fine.index(stride * (a + 1) - 1, stride * (b + 1) - 1)];
        }
    }
    return out;
}

/// Apply P_{to-1} ... P_{from} to carry a level-`from` vector up to level `to`.
inline Vector prolongate_to(const std::vector<SparseMatrix>& prolongations, int from, int to, Vector u) {
    for (int l = from; l < to; ++l) {
        u = prolongations[static_cast<std::size_t>(l - 1)] * u;
    }
    return u;
}

/// Point evaluation of the P1 function with interior coefficients u (zero on the boundary).
inline double evaluate_fe(const GridLevel& lvl, const Vector& u, double x, double y) {
    const int n = lvl.cells;
    const double sx = std::clamp(x, 0.0, 1.0) * n;
    const double sy = std::clamp(y, 0.0, 1.0) * n;
    const int cx = std::min(static_cast<int>(std::floor(sx)), n - 1);
    const int cy = std::min(static_cast<int>(std::floor(sy)), n - 1);
    const double xi = sx - cx;
    const double eta = sy - cy;

    auto value = [&](int ex, int ey) {
        const int ix = ex - 1;
        const int iy = ey - 1;
        return lvl.is_interior(ix, iy) ? u[lvl.index(ix, iy)] : 0.0;
    };
    const double v00 = value(cx, cy);
    const double v11 = value(cx + 1, cy + 1);
    if (xi >= eta) {
        // lower triangle (0,0),(1,0),(1,1)
        const double v10 = value(cx + 1, cy);
        return v00 + xi * (v10 - v00) + eta * (v11 - v10);
    }
    const double v01 = value(cx, cy + 1);
    return v00 + xi * (v11 - v01) + eta * (v01 - v00);
}

} // namespace mgconv
