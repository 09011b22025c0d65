#include "granger/evaluation.hpp"

#include "granger/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace granger {

GCEstimate extract_gc(const Model& model) {
    if (is_component_wise(model.config().kind)) {
        throw UsageError("extract_gc(single model) expects a joint kind; "
                         "pass the per-target collection instead");
    }
    GCEstimate out;
    out.model_kind = model.config().display_name();
    out.series_scores = model.gc_series_scores();
    out.lag_scores = model.gc_lag_scores();
    return out;
}

GCEstimate extract_gc(std::span<const std::unique_ptr<Model>> per_target) {
    if (per_target.empty()) throw UsageError("extract_gc: no models");
    const ModelConfig& first = per_target.front()->config();
    const std::size_t p = first.num_series;
    if (per_target.size() != p) {
        throw UsageError("extract_gc: need one model per target series");
    }

    GCEstimate out;
    out.model_kind = first.display_name();
    out.series_scores = Matrix(p, p);
    bool all_lags = true;
    std::vector<std::vector<double>> lag_rows(p);
    std::vector<bool> seen(p, false);

    for (const auto& model : per_target) {
        const ModelConfig& cfg = model->config();
        if (!is_component_wise(cfg.kind) || !cfg.target_index || cfg.num_series != p) {
            throw UsageError("extract_gc: inconsistent component models");
        }
        const std::size_t i = *cfg.target_index;
        if (seen[i]) throw UsageError("extract_gc: duplicate target " + std::to_string(i));
        seen[i] = true;
        Matrix row = model->gc_series_scores();
        for (std::size_t j = 0; j < p; ++j) out.series_scores.at(i, j) = row.at(0, j);
        if (auto lags = model->gc_lag_scores()) {
            lag_rows[i].assign(lags->v.begin(), lags->v.end());
        } else {
            all_lags = false;
        }
    }
    for (bool s : seen) {
        if (!s) throw UsageError("extract_gc: missing target model");
    }
    if (all_lags && !lag_rows.empty()) {
        const std::size_t lags = lag_rows[0].size();
        Matrix lag_scores(p, lags);
        for (std::size_t i = 0; i < p; ++i) {
            for (std::size_t k = 0; k < lags; ++k) lag_scores.at(i, k) = lag_rows[i][k];
        }
        out.lag_scores = std::move(lag_scores);
    }
    return out;
}

std::vector<double> min_max_scale_row(std::span<const double> row) {
    if (row.empty()) throw UsageError("min_max_scale: empty row");
    const auto [mn_it, mx_it] = std::minmax_element(row.begin(), row.end());
    const double mn = *mn_it, mx = *mx_it;
    std::vector<double> out(row.size(), 0.0);
    if (mx == mn) return out;  // constant row maps to zeros
    for (std::size_t i = 0; i < row.size(); ++i) out[i] = (row[i] - mn) / (mx - mn);
    return out;
}

Matrix min_max_scale(const Matrix& scores) {
    Matrix out(scores.rows, scores.cols);
    for (std::size_t r = 0; r < scores.rows; ++r) {
        std::vector<double> scaled =
            min_max_scale_row({scores.row_ptr(r), scores.cols});
        std::copy(scaled.begin(), scaled.end(), out.v.begin() + r * scores.cols);
    }
    return out;
}

GCEstimate threshold_gc(const GCEstimate& estimate, double threshold) {
    if (threshold < 0.0 || threshold > 1.0) {
        throw UsageError("threshold_gc: threshold must lie in [0, 1]");
    }
    GCEstimate out = estimate;
    out.scaled = min_max_scale(estimate.series_scores);
    out.threshold = threshold;
    Matrix binary(out.scaled->rows, out.scaled->cols);
    for (std::size_t i = 0; i < binary.numel(); ++i) {
        binary.v[i] = out.scaled->v[i] >= threshold ? 1.0 : 0.0;
    }
    out.binary = std::move(binary);
    return out;
}

namespace {

void check_metric_inputs(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    if (scores.size() != labels.size() || scores.empty()) {
        throw UsageError("metric inputs must be nonempty and equal length");
    }
}

} // namespace

double auroc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    check_metric_inputs(scores, labels);
    std::size_t n_pos = 0;
    for (std::uint8_t l : labels) n_pos += l ? 1 : 0;
    const std::size_t n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        throw MetricError("auroc undefined: labels contain a single class");
    }

    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] < scores[b];
    });

    // average ranks over tie runs, then the Mann-Whitney U statistic
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j + 1 < idx.size() && scores[idx[j + 1]] == scores[idx[i]]) ++j;
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t t = i; t <= j; ++t) {
            if (labels[idx[t]]) rank_sum_pos += avg_rank;
        }
        i = j + 1;
    }
    const double u = rank_sum_pos -
                     static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double aupr(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    check_metric_inputs(scores, labels);
    std::size_t n_pos = 0;
    for (std::uint8_t l : labels) n_pos += l ? 1 : 0;
    if (n_pos == 0) throw MetricError("aupr undefined: no positive labels");

    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] > scores[b];
    });

    // average precision; a tie block contributes at the precision reached
    // at the end of the block
    double sum = 0.0;
    std::size_t seen = 0, tp = 0, i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j + 1 < idx.size() && scores[idx[j + 1]] == scores[idx[i]]) ++j;
        std::size_t block_tp = 0;
        for (std::size_t t = i; t <= j; ++t) {
            if (labels[idx[t]]) ++block_tp;
        }
        seen += j - i + 1;
        tp += block_tp;
        if (block_tp > 0) {
            const double precision = static_cast<double>(tp) / static_cast<double>(seen);
            sum += static_cast<double>(block_tp) * precision;
        }
        i = j + 1;
    }
    return sum / static_cast<double>(n_pos);
}

bool lag_recovery(std::span<const double> lag_score_row, const std::set<std::size_t>& true_lags) {
    if (true_lags.empty()) throw UsageError("lag_recovery: empty true lag set");
    const std::size_t m = true_lags.size();
    if (m > lag_score_row.size()) throw UsageError("lag_recovery: more true lags than scores");
    for (std::size_t lag : true_lags) {
        if (lag < 1 || lag > lag_score_row.size()) {
            throw UsageError("lag_recovery: true lag out of range");
        }
    }

    std::vector<std::size_t> idx(lag_score_row.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return lag_score_row[a] > lag_score_row[b];
    });

    // an ambiguous selection boundary never counts as recovery
    if (m < idx.size() && lag_score_row[idx[m - 1]] == lag_score_row[idx[m]]) return false;

    std::set<std::size_t> top;
    for (std::size_t t = 0; t < m; ++t) top.insert(idx[t] + 1);
    return top == true_lags;
}

FlatScores flatten_scores(const Matrix& scores, const Matrix& truth, const MetricFlags& flags) {
    if (scores.rows != truth.rows || scores.cols != truth.cols) {
        throw DimensionError("flatten_scores: score and truth shapes differ");
    }
    FlatScores out;
    for (std::size_t i = 0; i < scores.rows; ++i) {
        for (std::size_t j = 0; j < scores.cols; ++j) {
            if (!flags.include_diagonal && i == j) continue;
            out.scores.push_back(scores.at(i, j));
            out.labels.push_back(truth.at(i, j) != 0.0 ? 1 : 0);
        }
    }
    return out;
}

} // namespace granger
