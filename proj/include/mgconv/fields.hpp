#pragma once

// Benchmark diffusion coefficients and their parameter distributions.

#include "mgconv/grid.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mgconv {

enum class FieldKind { UniformSmooth, LogNormalSmooth, CookieFixed, CookieVariable };

enum class ParamDistribution { Uniform, StandardNormal };

inline std::string to_string(FieldKind kind) {
    switch (kind) {
    case FieldKind::UniformSmooth: return "uniform";
    case FieldKind::LogNormalSmooth: return "lognormal";
    case FieldKind::CookieFixed: return "cookie_fixed";
    case FieldKind::CookieVariable: return "cookie_variable";
    }
    return "unknown";
}

inline FieldKind field_kind_from_string(const std::string& name) {
    if (name == "uniform") return FieldKind::UniformSmooth;
    if (name == "lognormal") return FieldKind::LogNormalSmooth;
    if (name == "cookie_fixed") return FieldKind::CookieFixed;
    if (name == "cookie_variable") return FieldKind::CookieVariable;
    throw std::invalid_argument("unknown field kind '" + name + "'");
}

namespace detail {

inline int exact_sqrt(int v) {
    if (v <= 0) return -1;
    int r = static_cast<int>(std::lround(std::sqrt(static_cast<double>(v))));
    return r * r == v ? r : -1;
}

} // namespace detail

struct FieldSpec {
    FieldKind kind = FieldKind::UniformSmooth;
    int p = 10;
    double decay_scale = 0.1;

    double a0() const {
        switch (kind) {
        case FieldKind::UniformSmooth: return 1.0;
        case FieldKind::LogNormalSmooth: return 0.0;
        case FieldKind::CookieFixed:
        case FieldKind::CookieVariable: return 0.1;
        }
        return 0.0;
    }

    ParamDistribution distribution() const {
        return kind == FieldKind::LogNormalSmooth ? ParamDistribution::StandardNormal
                                                  : ParamDistribution::Uniform;
    }

    /// Number of inclusions for the cookie families, 0 otherwise.
    int cookies() const {
        switch (kind) {
        case FieldKind::CookieFixed: return p;
        case FieldKind::CookieVariable: return p / 2;
        default: return 0;
        }
    }

    /// Inclusions per lattice side.
    int lattice_side() const { return detail::exact_sqrt(cookies()); }

    void validate() const {
        if (p < 1) {
            throw std::invalid_argument("field parameter dimension p must be >= 1");
        }
        if (kind == FieldKind::CookieFixed && detail::exact_sqrt(p) < 0) {
            throw std::invalid_argument("cookie_fixed requires p to be a perfect square, got " + std::to_string(p));
        }
        if (kind == FieldKind::CookieVariable && (p % 2 != 0 || detail::exact_sqrt(p / 2) < 0)) {
            throw std::invalid_argument("cookie_variable requires p even with p/2 a perfect square, got " +
                                        std::to_string(p));
        }
    }
};

inline void to_json(nlohmann::json& j, const FieldSpec& spec) {
    j = nlohmann::json{{"kind", to_string(spec.kind)}, {"p", spec.p}};
}

inline void from_json(const nlohmann::json& j, FieldSpec& spec) {
    spec.kind = field_kind_from_string(j.at("kind").get<std::string>());
    spec.p = j.at("p").get<int>();
    spec.validate();
}

struct ParamVector {
    Vector y;
    ParamDistribution distribution = ParamDistribution::Uniform;
};

/// Draw y for sample `index`; the stream depends only on (seed, index).
inline ParamVector sample_parameters(const FieldSpec& spec, std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    std::mt19937_64 rng(seq);
    ParamVector out{Vector(spec.p), spec.distribution()};
    if (out.distribution == ParamDistribution::Uniform) {
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        for (int k = 0; k < spec.p; ++k) out.y[k] = dist(rng);
    } else {
        std::normal_distribution<double> dist(0.0, 1.0);
        for (int k = 0; k < spec.p; ++k) out.y[k] = dist(rng);
    }
    return out;
}

/// Frequency pair of the k-th planar Fourier mode (k >= 1): pairs of N0^2 \ {0}
/// ordered by b1 + b2, then by b2.
inline std::pair<int, int> fourier_frequencies(int k) {
    int remaining = k;
    for (int s = 1;; ++s) {
        if (remaining <= s + 1) {
            const int b2 = remaining - 1;
            return {s - b2, b2};
        }
        remaining -= s + 1;
    }
}

/// Cookie inclusion geometry for one parameter vector.
struct Disk {
    double cx = 0.0;
    double cy = 0.0;
    double radius = 0.0;
    double value = 0.0;
};

/// Conductivity added inside an inclusion for parameter value y in [-1, 1].
inline double inclusion_value(double y) { return 0.5 * (1.0 + y); }

/// Radius of a variable-radius inclusion: affine from [-1,1] onto [0.5, 0.9] / sqrt(p').
inline double variable_radius(double y, int cookies) {
    const double s = 1.0 / std::sqrt(static_cast<double>(cookies));
    return 0.7 * s + 0.2 * s * y;
}

inline std::vector<Disk> cookie_disks(const FieldSpec& spec, const Vector& y) {
    const int side = spec.lattice_side();
    const int count = spec.cookies();
    std::vector<Disk> disks;
    disks.reserve(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
        const int i = k % side + 1;
        const int j = k / side + 1;
        Disk d;
        d.cx = (i - 0.5) / side;
        d.cy = (j - 0.5) / side;
        if (spec.kind == FieldKind::CookieFixed) {
            d.radius = 0.3 / std::sqrt(static_cast<double>(spec.p));
            d.value = inclusion_value(y[k]);
        } else {
            d.value = inclusion_value(y[2 * k]);
            d.radius = variable_radius(y[2 * k + 1], count);
        }
        disks.push_back(d);
    }
    return disks;
}

namespace detail {

/// Nodal values on the (points x points) lattice x_i = i / cells, i in [first, first + points).
inline Vector evaluate_on_lattice(const FieldSpec& spec, const Vector& y, int cells, int first, int points) {
    spec.validate();
    if (y.size() != spec.p) {
        throw std::invalid_argument("parameter vector has " + std::to_string(y.size()) + " entries, field expects " +
                                    std::to_string(spec.p));
    }
    std::vector<double> coord(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) {
        coord[static_cast<std::size_t>(i)] = static_cast<double>(first + i) / static_cast<double>(cells);
    }

    Vector out = Vector::Constant(static_cast<Eigen::Index>(points) * points, spec.a0());
    switch (spec.kind) {
    case FieldKind::UniformSmooth:
    case FieldKind::LogNormalSmooth: {
        constexpr double two_pi = 6.283185307179586476925286766559;
        std::vector<double> cx(static_cast<std::size_t>(points));
        std::vector<double> cy(static_cast<std::size_t>(points));
        for (int k = 1; k <= spec.p; ++k) {
            const auto [b1, b2] = fourier_frequencies(k);
            const double amp = spec.decay_scale / (static_cast<double>(k) * k) * y[k - 1];
            for (int i = 0; i < points; ++i) {
                cx[static_cast<std::size_t>(i)] = std::cos(two_pi * b1 * coord[static_cast<std::size_t>(i)]);
                cy[static_cast<std::size_t>(i)] = std::cos(two_pi * b2 * coord[static_cast<std::size_t>(i)]);
            }
            for (int j = 0; j < points; ++j) {
                for (int i = 0; i < points; ++i) {
                    out[j * points + i] += amp * cx[static_cast<std::size_t>(i)] * cy[static_cast<std::size_t>(j)];
                }
            }
        }
        if (spec.kind == FieldKind::LogNormalSmooth) {
            out = out.array().exp();
        }
        break;
    }
    case FieldKind::CookieFixed:
    case FieldKind::CookieVariable: {
        for (const Disk& d : cookie_disks(spec, y)) {
            const double r2 = d.radius * d.radius;
            for (int j = 0; j < points; ++j) {
                const double dy = coord[static_cast<std::size_t>(j)] - d.cy;
                for (int i = 0; i < points; ++i) {
                    const double dx = coord[static_cast<std::size_t>(i)] - d.cx;
                    // strictly inside
                    if (dx * dx + dy * dy < r2) out[j * points + i] += d.value;
                }
            }
        }
        break;
    }
    }
    return out;
}

} // namespace detail

/// Nodal coefficient at the interior vertices of `level`.
inline Vector evaluate_kappa(const FieldSpec& spec, const Vector& y, const GridLevel& level) {
    return detail::evaluate_on_lattice(spec, y, level.cells, 1, level.interior_per_side());
}

/// Nodal coefficient on all (cells + 1)^2 vertices, boundary ring included.
inline Vector evaluate_kappa_extended(const FieldSpec& spec, const Vector& y, const GridLevel& level) {
    return detail::evaluate_on_lattice(spec, y, level.cells, 0, level.extended_per_side());
}

} // namespace mgconv
