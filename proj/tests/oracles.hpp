// Brute-force reference implementations used only by tests. These stay
// deliberately independent of the library's metric code paths: AUROC is
// counted pair by pair, and average precision is rebuilt by rescanning the
// whole score list at every distinct threshold.
#ifndef GRANGER_TESTS_ORACLES_HPP
#define GRANGER_TESTS_ORACLES_HPP

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

namespace granger::oracle {

inline double auroc_pairwise(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    double wins = 0.0;
    std::size_t n_pos = 0, n_neg = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!labels[i]) continue;
        ++n_pos;
        for (std::size_t j = 0; j < labels.size(); ++j) {
            if (labels[j]) continue;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    for (std::uint8_t l : labels) n_neg += l ? 0 : 1;
    return wins / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

inline double aupr_threshold_scan(std::span<const double> scores,
                                  std::span<const std::uint8_t> labels) {
    std::vector<double> thresholds(scores.begin(), scores.end());
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    std::size_t total_pos = 0;
    for (std::uint8_t l : labels) total_pos += l ? 1 : 0;

    double sum = 0.0;
    std::size_t prev_tp = 0;
    for (double t : thresholds) {
        std::size_t tp = 0, predicted = 0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (scores[i] >= t) {
                ++predicted;
                if (labels[i]) ++tp;
            }
        }
        if (tp > prev_tp) {
            const double precision = static_cast<double>(tp) / static_cast<double>(predicted);
            sum += static_cast<double>(tp - prev_tp) * precision;
        }
        prev_tp = tp;
    }
    return sum / static_cast<double>(total_pos);
}

} // namespace granger::oracle

#endif
