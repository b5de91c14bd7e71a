#pragma once

// Mean relative errors: sqrt(sum_i ||u_i - v_i||^2 / sum_i ||v_i||^2).

#include "mgconv/fe.hpp"
#include "mgconv/grid.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace mgconv {

enum class NormKind { H1, L2 };

inline std::string to_string(NormKind n) { return n == NormKind::H1 ? "H1" : "L2"; }

struct MetricReport {
    std::string metric; // MRH1, MRL2, MRH1_ref, MRL2_ref
    double value = 0.0;
    std::size_t samples = 0;
    int level = 0;
    int reference_level = 0;
};

inline void to_json(nlohmann::json& j, const MetricReport& r) {
    j = nlohmann::json{{"metric", r.metric},
                       {"value", r.value},
                       {"samples", r.samples},
                       {"level", r.level},
                       {"reference_level", r.reference_level}};
}

inline double mr_error(const std::vector<Vector>& predictions, const std::vector<Vector>& solutions, NormKind norm,
                       const GridLevel& level) {
    if (predictions.size() != solutions.size()) {
        throw std::invalid_argument("mr_error: " + std::to_string(predictions.size()) + " predictions for " +
                                    std::to_string(solutions.size()) + " solutions");
    }
    const NormEvaluator ev(level);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < solutions.size(); ++i) {
        detail::check_size(predictions[i], level.dof(), "mr_error prediction");
        const Vector diff = predictions[i] - solutions[i];
        if (norm == NormKind::H1) {
            num += ev.h1_squared(diff);
            den += ev.h1_squared(solutions[i]);
        } else {
            num += ev.l2_squared(diff);
            den += ev.l2_squared(solutions[i]);
        }
    }
    if (!(den > 0.0)) throw std::domain_error("mr_error: solutions have zero norm");
    return std::sqrt(num / den);
}

/// Predictions on level `level` of `hier_ref` are prolongated to its finest level and compared there.
inline double mr_error_ref(const std::vector<Vector>& predictions, int level, const std::vector<Vector>& references,
                           NormKind norm, const GridHierarchy& hier_ref) {
    if (level < 1 || level > hier_ref.num_levels()) {
        throw std::invalid_argument("mr_error_ref: prediction level " + std::to_string(level) +
                                    " is not part of the reference hierarchy");
    }
    const std::vector<SparseMatrix> p = prolongation_matrices(hier_ref);
    std::vector<Vector> lifted;
    lifted.reserve(predictions.size());
    for (const Vector& u : predictions) {
        detail::check_size(u, hier_ref.level(level).dof(), "mr_error_ref prediction");
        lifted.push_back(prolongate_to(p, level, hier_ref.num_levels(), u));
    }
    return mr_error(lifted, references, norm, hier_ref.finest());
}

} // namespace mgconv
