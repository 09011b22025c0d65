#include "granger/penalties.hpp"

#include "granger/errors.hpp"

namespace granger {

using ad::Tape;
using ad::Var;

std::string to_string(PenaltyKind k) {
    switch (k) {
        case PenaltyKind::group_lasso: return "GroupLasso";
        case PenaltyKind::sparse_group_lasso: return "SparseGroupLasso";
        case PenaltyKind::hierarchical_group_lasso: return "HierarchicalGroupLasso";
        case PenaltyKind::decoupled_l1: return "DecoupledL1";
    }
    return "?";
}

PenaltyKind penalty_kind_from_string(const std::string& s) {
    if (s == "GroupLasso") return PenaltyKind::group_lasso;
    if (s == "SparseGroupLasso") return PenaltyKind::sparse_group_lasso;
    if (s == "HierarchicalGroupLasso") return PenaltyKind::hierarchical_group_lasso;
    if (s == "DecoupledL1") return PenaltyKind::decoupled_l1;
    throw ConfigError("unknown penalty kind: " + s);
}

void PenaltyConfig::validate() const {
    std::string problems;
    if (lambda < 0.0) problems += "lambda must be nonnegative; ";
    if (kind == PenaltyKind::sparse_group_lasso) {
        if (!alpha) {
            problems += "alpha required for SparseGroupLasso; ";
        } else if (*alpha <= 0.0 || *alpha >= 1.0) {
            problems += "alpha must lie in (0,1); ";
        }
    } else if (alpha) {
        problems += "alpha only applies to SparseGroupLasso; ";
    }
    if (lambda_q && *lambda_q < 0.0) problems += "lambda_q must be nonnegative; ";
    if (!problems.empty()) throw ConfigError("PenaltyConfig: " + problems);
}

namespace {

Var sum_vars(Tape& tape, const std::vector<Var>& terms) {
    if (terms.empty()) return tape.constant(ad::Tensor::scalar(0.0));
    Var acc = terms[0];
    for (std::size_t i = 1; i < terms.size(); ++i) acc = tape.add(acc, terms[i]);
    return acc;
}

void check_partition(Tape& tape, const PenaltyGroup& g) {
    if (g.lag_parts.empty()) {
        throw StructureError("penalty group '" + g.name + "' has no per-lag partition");
    }
    std::size_t parts = 0;
    for (Var p : g.lag_parts) parts += tape.value(p).numel();
    if (parts != tape.value(g.whole).numel()) {
        throw StructureError("penalty group '" + g.name + "': lag subgroups cover " +
                             std::to_string(parts) + " of " +
                             std::to_string(tape.value(g.whole).numel()) + " weights");
    }
}

} // namespace

Var group_lasso(Tape& tape, std::span<const PenaltyGroup> groups) {
    if (groups.empty()) throw UsageError("group_lasso: no groups");
    std::vector<Var> terms;
    terms.reserve(groups.size());
    for (const auto& g : groups) terms.push_back(tape.group_norm(g.whole));
    return sum_vars(tape, terms);
}

Var sparse_group_lasso(Tape& tape, std::span<const PenaltyGroup> groups, double alpha) {
    if (groups.empty()) throw UsageError("sparse_group_lasso: no groups");
    std::vector<Var> terms;
    for (const auto& g : groups) {
        check_partition(tape, g);
        terms.push_back(tape.scalar_mul(tape.group_norm(g.whole), alpha));
        for (Var part : g.lag_parts) {
            terms.push_back(tape.scalar_mul(tape.group_norm(part), 1.0 - alpha));
        }
    }
    return sum_vars(tape, terms);
}

Var hierarchical_group_lasso(Tape& tape, std::span<const PenaltyGroup> groups) {
    if (groups.empty()) throw UsageError("hierarchical_group_lasso: no groups");
    std::vector<Var> terms;
    for (const auto& g : groups) {
        check_partition(tape, g);
        const std::size_t lags = g.lag_parts.size();
        for (std::size_t k = 0; k < lags; ++k) {
            std::vector<Var> suffix(g.lag_parts.begin() + static_cast<std::ptrdiff_t>(k),
                                    g.lag_parts.end());
            Var stacked = suffix.size() == 1 ? suffix[0] : tape.concat(suffix);
            terms.push_back(tape.group_norm(stacked));
        }
    }
    return sum_vars(tape, terms);
}

Var decoupled_l1(Tape& tape, Var v, Var q, double lambda_v, double lambda_q) {
    const std::size_t p = tape.value(v).numel();
    const std::size_t lags = tape.value(q).numel();
    std::vector<Var> terms;
    terms.reserve(p + lags);
    // |x| as the L2 norm of a singleton group; its subgradient at 0 is 0
    for (std::size_t j = 0; j < p; ++j) {
        terms.push_back(tape.scalar_mul(tape.group_norm(tape.slice(v, j, 1)), lambda_v));
    }
    for (std::size_t k = 0; k < lags; ++k) {
        terms.push_back(tape.scalar_mul(tape.group_norm(tape.slice(q, k, 1)), lambda_q));
    }
    return sum_vars(tape, terms);
}

Var penalty_term(Tape& tape, std::span<const PenaltyGroup> groups, const PenaltyConfig& config) {
    config.validate();
    if (config.kind == PenaltyKind::decoupled_l1) {
        std::vector<Var> terms;
        for (const auto& g : groups) {
            if (g.role == GroupRole::factor_v) {
                terms.push_back(tape.scalar_mul(tape.group_norm(g.whole), config.lambda));
            } else if (g.role == GroupRole::factor_q) {
                terms.push_back(tape.scalar_mul(tape.group_norm(g.whole), config.effective_lambda_q()));
            } else {
                throw ConfigError("DecoupledL1 applied to a non-factor group '" + g.name + "'");
            }
        }
        if (terms.empty()) throw UsageError("penalty_term: no factor groups");
        return sum_vars(tape, terms);
    }
    for (const auto& g : groups) {
        if (g.role != GroupRole::series) {
            throw ConfigError("penalty '" + to_string(config.kind) +
                              "' applied to factor group '" + g.name +
                              "'; decoupled models take DecoupledL1");
        }
    }
    Var base = config.kind == PenaltyKind::group_lasso ? group_lasso(tape, groups)
               : config.kind == PenaltyKind::sparse_group_lasso
                   ? sparse_group_lasso(tape, groups, *config.alpha)
                   : hierarchical_group_lasso(tape, groups);
    return tape.scalar_mul(base, config.lambda);
}

} // namespace granger
