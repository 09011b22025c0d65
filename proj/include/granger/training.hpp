#ifndef GRANGER_TRAINING_HPP
#define GRANGER_TRAINING_HPP

#include "granger/datagen.hpp"
#include "granger/models.hpp"
#include "granger/penalties.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace granger {

struct TrainConfig {
    std::size_t epochs = 200;
    std::size_t batch_size = 1024;
    double learning_rate = 0.01;
    double lambda = 0.0;  // penalty scale; copied into the PenaltyConfig
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double val_fraction = 0.2;
    std::uint64_t seed = 1;

    void validate() const;
};

struct EpochStats {
    double data_loss = 0.0;  // epoch mean of the batch MSE term
    double penalty = 0.0;    // epoch mean of the lambda-scaled penalty term
    double val_mse = 0.0;    // data term only
    double seconds = 0.0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
};

struct TrainResult {
    TrainHistory history;
    double best_val_mse = 0.0;
    std::size_t best_epoch = 0;  // 1-based; 0 when no epoch ran
    bool diverged = false;
    std::vector<std::vector<double>> best_values;

    void restore_best(Model& model) const { model.restore_values(best_values); }
};

/// One Adam update with bias correction:
///   m <- b1*m + (1-b1)*g,  v <- b2*v + (1-b2)*g^2,
///   p <- p - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps).
void adam_step(std::span<double> param, std::span<const double> grad, std::span<double> m,
               std::span<double> v, double lr, double beta1, double beta2, double eps,
               std::size_t t);

class AdamOptimizer {
  public:
    AdamOptimizer(std::vector<std::pair<std::string, ad::Tensor*>> params, double lr,
                  double beta1, double beta2, double eps);

    /// Applies one step from the tensors' accumulated gradients; missing
    /// gradients count as zero. Throws NumericError naming the parameter
    /// group on a non-finite gradient.
    void step();
    std::size_t steps_taken() const { return t_; }

  private:
    std::vector<std::pair<std::string, ad::Tensor*>> params_;
    std::vector<std::vector<double>> m_, v_;
    double lr_, beta1_, beta2_, eps_;
    std::size_t t_ = 0;
};

/// Data term + lambda-scaled penalty on the given rows, with gradients
/// accumulated into the model parameters (cleared first by default).
struct BatchEval {
    double data_term = 0.0;
    double penalty_term = 0.0;
};
BatchEval eval_loss_and_grads(Model& model, const LaggedDataset& data,
                              std::span<const std::size_t> rows, const PenaltyConfig& penalty,
                              bool zero_grads = true);

/// Mean squared prediction error over the given rows (no penalty).
double validation_mse(Model& model, const LaggedDataset& data,
                      std::span<const std::size_t> rows, std::size_t chunk_size = 1024);

/// Mini-batch Adam on MSE + penalty, reshuffling each epoch; keeps the
/// parameter snapshot with the best validation MSE. The model is left at its
/// final parameters. A run is marked diverged when the loss goes non-finite
/// (training stops at the last finite epoch) or the best validation MSE ends
/// above 1000x the mean-predictor baseline.
TrainResult train(Model& model, const LaggedDataset& data, const SplitIndices& split,
                  const PenaltyConfig& penalty, const TrainConfig& cfg);

struct GridPointResult {
    std::optional<std::size_t> target;  // absent for joint kinds
    double learning_rate = 0.0;
    double lambda = 0.0;
    double val_mse = 0.0;
    std::size_t best_epoch = 0;
    bool diverged = false;
};

struct GridSearchResult {
    /// Winner models restored to their best snapshots: one per target series
    /// for component-wise kinds, a single entry for joint kinds.
    std::vector<std::unique_ptr<Model>> models;
    std::vector<GridPointResult> winners;  // aligned with models
    std::vector<TrainHistory> winner_histories;
    std::vector<GridPointResult> points;   // every grid point
};

/// Trains every (target, learning rate, lambda) combination and selects per
/// target by lowest validation MSE; ties prefer lower lambda, then lower
/// learning rate. Diverged points are flagged and skipped in selection;
/// a target whose points all diverged raises an aggregate error.
GridSearchResult grid_search(const ModelConfig& base_config, const LaggedDataset& data,
                             const SplitIndices& split, std::span<const double> lr_grid,
                             std::span<const double> lambda_grid,
                             const PenaltyConfig& penalty_template, const TrainConfig& base_train,
                             std::size_t workers = 0);

/// Worker count: explicit request, else GRANGER_WORKERS, else hardware.
std::size_t resolve_workers(std::size_t requested, std::size_t n_tasks);

/// The penalty kind a model kind trains with by default.
PenaltyKind default_penalty_kind(ModelKind kind);

/// Model/penalty compatibility rules (decoupled factors take DecoupledL1,
/// hierarchical is rejected for recurrent kinds, ...).
void check_model_penalty(const ModelConfig& model, const PenaltyConfig& penalty);

} // namespace granger

#endif
