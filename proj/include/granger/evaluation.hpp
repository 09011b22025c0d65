#ifndef GRANGER_EVALUATION_HPP
#define GRANGER_EVALUATION_HPP

#include "granger/matrix.hpp"
#include "granger/models.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace granger {

/// Nonnegative Granger-causality evidence. series_scores[i][j] scores
/// "series j causes series i"; lag_scores[i][k-1] scores lag k for target i.
struct GCEstimate {
    std::string model_kind;
    Matrix series_scores;              // p x p
    std::optional<Matrix> lag_scores;  // p x K
    std::optional<Matrix> scaled;      // per-row min-max scaled scores
    std::optional<double> threshold;
    std::optional<Matrix> binary;      // 0/1, present iff threshold set
};

/// Reads GC scores from a trained joint model (VAR / LeKVAR).
GCEstimate extract_gc(const Model& model);

/// Assembles GC scores from per-target component models (row i from the
/// model whose target_index is i).
GCEstimate extract_gc(std::span<const std::unique_ptr<Model>> per_target);

/// (x - min) / (max - min) per row; constant rows map to all zeros.
std::vector<double> min_max_scale_row(std::span<const double> row);
Matrix min_max_scale(const Matrix& scores);

/// Min-max scales the series scores and thresholds them into a binary graph.
GCEstimate threshold_gc(const GCEstimate& estimate, double threshold);

/// Mann-Whitney AUROC: the probability that a positive outscores a negative,
/// ties counted one half. Both classes must be present.
double auroc(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// Average precision with descending-score tie groups evaluated at the end
/// of the block. Needs at least one positive label.
double aupr(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// True iff the |true_lags| largest lag scores sit exactly at the true lags
/// (1-based); a tie across the selection boundary returns false.
bool lag_recovery(std::span<const double> lag_score_row, const std::set<std::size_t>& true_lags);

struct MetricFlags {
    bool include_diagonal = true;
};

struct FlatScores {
    std::vector<double> scores;
    std::vector<std::uint8_t> labels;
};

/// Flattens a score matrix against a 0/1 truth matrix for ranking metrics.
FlatScores flatten_scores(const Matrix& scores, const Matrix& truth, const MetricFlags& flags);

} // namespace granger

#endif
