#ifndef GRANGER_PENALTIES_HPP
#define GRANGER_PENALTIES_HPP

#include "granger/tape.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace granger {

enum class PenaltyKind {
    group_lasso,
    sparse_group_lasso,
    hierarchical_group_lasso,
    decoupled_l1,
};

std::string to_string(PenaltyKind k);
PenaltyKind penalty_kind_from_string(const std::string& s);

struct PenaltyConfig {
    PenaltyKind kind = PenaltyKind::group_lasso;
    double lambda = 0.0;
    /// Across/within trade-off, sparse_group_lasso only; must lie in (0,1).
    std::optional<double> alpha;
    /// Lag-factor weight for decoupled_l1; defaults to lambda.
    std::optional<double> lambda_q;

    double effective_lambda_q() const { return lambda_q.value_or(lambda); }
    void validate() const;
};

/// Role of a penalized weight group in the GC readout.
enum class GroupRole {
    series,      // one (i,j) input group
    factor_v,    // one entry of the series-importance vector v
    factor_q,    // one entry of the lag-importance vector q
};

/// A named weight group exposed by a model on the active tape. `whole` is
/// the full group; `lag_parts`, when the model distinguishes lags, holds the
/// per-lag subgroups in order k = 1..K and partitions `whole` exactly.
struct PenaltyGroup {
    std::string name;
    GroupRole role = GroupRole::series;
    ad::Var whole;
    std::vector<ad::Var> lag_parts;
};

/// Sum of L2 norms of the whole groups.
ad::Var group_lasso(ad::Tape& tape, std::span<const PenaltyGroup> groups);

/// alpha * whole-group norm + (1 - alpha) * sum of per-lag subgroup norms.
ad::Var sparse_group_lasso(ad::Tape& tape, std::span<const PenaltyGroup> groups, double alpha);

/// Nested-suffix norms over lags: sum_k || (lag_k, ..., lag_K) ||_2.
ad::Var hierarchical_group_lasso(ad::Tape& tape, std::span<const PenaltyGroup> groups);

/// lambda_v * sum_j |v_j| + lambda_q * sum_k |q_k| over the factor groups.
ad::Var decoupled_l1(ad::Tape& tape, ad::Var v, ad::Var q, double lambda_v, double lambda_q);

/// The full lambda-scaled penalty term for a model's groups. Group penalties
/// are scaled by config.lambda; decoupled_l1 uses lambda for v and
/// effective_lambda_q() for q.
ad::Var penalty_term(ad::Tape& tape, std::span<const PenaltyGroup> groups, const PenaltyConfig& config);

} // namespace granger

#endif
