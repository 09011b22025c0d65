#include "granger/training.hpp"

#include "granger/errors.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

namespace granger {

using ad::Tape;
using ad::Tensor;
using ad::Var;

void TrainConfig::validate() const {
    std::string problems;
    if (batch_size == 0) problems += "batch_size must be positive; ";
    if (learning_rate <= 0.0) problems += "learning_rate must be positive; ";
    if (lambda < 0.0) problems += "lambda must be nonnegative; ";
    if (adam_beta1 <= 0.0 || adam_beta1 >= 1.0) problems += "adam_beta1 must lie in (0,1); ";
    if (adam_beta2 <= 0.0 || adam_beta2 >= 1.0) problems += "adam_beta2 must lie in (0,1); ";
    if (adam_eps <= 0.0) problems += "adam_eps must be positive; ";
    if (val_fraction <= 0.0 || val_fraction >= 1.0) problems += "val_fraction must lie in (0,1); ";
    if (!problems.empty()) throw ConfigError("TrainConfig: " + problems);
}

void adam_step(std::span<double> param, std::span<const double> grad, std::span<double> m,
               std::span<double> v, double lr, double beta1, double beta2, double eps,
               std::size_t t) {
    if (t < 1) throw UsageError("adam_step: t starts at 1");
    if (param.size() != grad.size() || param.size() != m.size() || param.size() != v.size()) {
        throw DimensionError("adam_step: state sizes must match the parameter");
    }
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < param.size(); ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        param[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
}

AdamOptimizer::AdamOptimizer(std::vector<std::pair<std::string, Tensor*>> params, double lr,
                             double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (auto& [name, t] : params_) {
        m_.emplace_back(t->numel(), 0.0);
        v_.emplace_back(t->numel(), 0.0);
    }
}

void AdamOptimizer::step() {
    ++t_;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& [name, tensor] = params_[i];
        tensor->ensure_grad();
        const std::vector<double>& g = *tensor->grad;
        for (double gv : g) {
            if (!std::isfinite(gv)) {
                throw NumericError("non-finite gradient in parameter group '" + name + "'");
            }
        }
        adam_step(tensor->values, g, m_[i], v_[i], lr_, beta1_, beta2_, eps_, t_);
    }
}

namespace {

struct BatchTensors {
    Tensor inputs;   // [n x K*p]
    Tensor targets;  // [n x out_width]
};

BatchTensors gather_batch(const LaggedDataset& data, std::span<const std::size_t> rows,
                          const ModelConfig& cfg) {
    const std::size_t width = data.inputs.cols;
    const std::size_t out_width = is_component_wise(cfg.kind) ? 1 : data.targets.cols;
    BatchTensors out;
    out.inputs = Tensor::zeros({rows.size(), width});
    out.targets = Tensor::zeros({rows.size(), out_width});
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const double* src = data.inputs.row_ptr(rows[r]);
        std::copy(src, src + width, out.inputs.values.begin() + r * width);
        if (is_component_wise(cfg.kind)) {
            out.targets.values[r] = data.targets.at(rows[r], *cfg.target_index);
        } else {
            const double* t = data.targets.row_ptr(rows[r]);
            std::copy(t, t + out_width, out.targets.values.begin() + r * out_width);
        }
    }
    return out;
}

bool penalty_active(const PenaltyConfig& p) {
    return p.lambda > 0.0 || (p.kind == PenaltyKind::decoupled_l1 && p.effective_lambda_q() > 0.0);
}

std::string batch_stream_name(const ModelConfig& cfg) {
    return cfg.target_index ? "batch/t" + std::to_string(*cfg.target_index) : "batch/joint";
}

} // namespace

PenaltyKind default_penalty_kind(ModelKind kind) {
    return has_decoupling_factors(kind) ? PenaltyKind::decoupled_l1 : PenaltyKind::group_lasso;
}

void check_model_penalty(const ModelConfig& model, const PenaltyConfig& penalty) {
    penalty.validate();
    if (has_decoupling_factors(model.kind) && penalty.kind != PenaltyKind::decoupled_l1) {
        throw ConfigError("model " + to_string(model.kind) + " penalizes its decoupling factors; "
                          "use DecoupledL1");
    }
    if (!has_decoupling_factors(model.kind) && penalty.kind == PenaltyKind::decoupled_l1) {
        throw ConfigError("DecoupledL1 requires a decoupled (wF) model kind");
    }
    if (is_recurrent(model.kind) && penalty.kind == PenaltyKind::hierarchical_group_lasso) {
        throw ConfigError("hierarchical group lasso is not applicable to recurrent models "
                          "(weights are shared across lags)");
    }
}

BatchEval eval_loss_and_grads(Model& model, const LaggedDataset& data,
                              std::span<const std::size_t> rows, const PenaltyConfig& penalty,
                              bool zero_grads) {
    if (zero_grads) {
        for (Tensor* t : model.parameter_tensors()) {
            t->ensure_grad();
            t->zero_grad();
        }
    }
    BatchTensors batch = gather_batch(data, rows, model.config());
    Tape tape;
    Var x = tape.constant(std::move(batch.inputs));
    Var pred = model.forward(tape, x);
    Var data_term = tape.mse(pred, tape.constant(std::move(batch.targets)));
    Var loss = data_term;
    BatchEval out;
    if (penalty_active(penalty)) {
        auto groups = model.penalized_groups(tape);
        Var pen = penalty_term(tape, groups, penalty);
        out.penalty_term = tape.scalar_value(pen);
        loss = tape.add(data_term, pen);
    }
    out.data_term = tape.scalar_value(data_term);
    tape.backward(loss);
    return out;
}

double validation_mse(Model& model, const LaggedDataset& data,
                      std::span<const std::size_t> rows, std::size_t chunk_size) {
    if (rows.empty()) throw UsageError("validation_mse: empty row set");
    const std::size_t out_width = model.output_width();
    double sse = 0.0;
    for (std::size_t start = 0; start < rows.size(); start += chunk_size) {
        const std::size_t n = std::min(chunk_size, rows.size() - start);
        BatchTensors batch = gather_batch(data, rows.subspan(start, n), model.config());
        Tape tape;
        Var x = tape.constant(std::move(batch.inputs));
        Var pred = model.forward(tape, x);
        Var err = tape.mse(pred, tape.constant(std::move(batch.targets)));
        sse += tape.scalar_value(err) * static_cast<double>(n * out_width);
    }
    return sse / static_cast<double>(rows.size() * out_width);
}

TrainResult train(Model& model, const LaggedDataset& data, const SplitIndices& split,
                  const PenaltyConfig& penalty_in, const TrainConfig& cfg) {
    cfg.validate();
    PenaltyConfig penalty = penalty_in;
    penalty.lambda = cfg.lambda;
    check_model_penalty(model.config(), penalty);
    if (split.train.empty() || split.val.empty()) throw UsageError("train: empty split");

    TrainResult result;
    result.best_values = model.snapshot_values();
    result.best_val_mse = validation_mse(model, data, split.val, cfg.batch_size);
    result.best_epoch = 0;
    const double initial_val_mse = result.best_val_mse;

    AdamOptimizer adam(model.named_parameters(), cfg.learning_rate, cfg.adam_beta1,
                       cfg.adam_beta2, cfg.adam_eps);
    RngStream shuffle_rng(cfg.seed, batch_stream_name(model.config()));

    std::vector<std::size_t> order(split.train.begin(), split.train.end());
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        {
            std::vector<std::size_t> perm = shuffle_rng.permutation(order.size());
            std::vector<std::size_t> shuffled(order.size());
            for (std::size_t i = 0; i < order.size(); ++i) shuffled[i] = split.train[perm[i]];
            order = std::move(shuffled);
        }

        double data_sum = 0.0, pen_sum = 0.0;
        bool finite = true;
        try {
            for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
                const std::size_t n = std::min(cfg.batch_size, order.size() - start);
                BatchEval ev = eval_loss_and_grads(
                    model, data, std::span<const std::size_t>(order).subspan(start, n), penalty);
                adam.step();
                model.project_after_step();
                data_sum += ev.data_term * static_cast<double>(n);
                pen_sum += ev.penalty_term * static_cast<double>(n);
            }
        } catch (const NumericError&) {
            finite = false;
        }

        if (!finite) {
            result.diverged = true;  // aborted; history ends at the last finite epoch
            break;
        }

        EpochStats stats;
        stats.data_loss = data_sum / static_cast<double>(order.size());
        stats.penalty = pen_sum / static_cast<double>(order.size());
        stats.val_mse = validation_mse(model, data, split.val, cfg.batch_size);
        stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.history.epochs.push_back(stats);

        if (!std::isfinite(stats.val_mse) || !std::isfinite(stats.data_loss)) {
            result.diverged = true;
            result.history.epochs.pop_back();
            break;
        }
        if (stats.val_mse < result.best_val_mse) {
            result.best_val_mse = stats.val_mse;
            result.best_epoch = epoch;
            result.best_values = model.snapshot_values();
        }
    }

    // a run that ends an order of magnitude worse than where it started has
    // left the useful regime even if every step stayed finite
    if (!result.diverged && !result.history.epochs.empty() &&
        result.history.epochs.back().val_mse > 10.0 * std::max(initial_val_mse, 1e-12)) {
        result.diverged = true;
    }
    return result;
}

std::size_t resolve_workers(std::size_t requested, std::size_t n_tasks) {
    std::size_t n = requested;
    if (n == 0) {
        if (const char* env = std::getenv("GRANGER_WORKERS")) {
            n = static_cast<std::size_t>(std::strtoul(env, nullptr, 10));
        }
    }
    if (n == 0) n = std::thread::hardware_concurrency();
    if (n == 0) n = 1;
    return std::max<std::size_t>(1, std::min(n, std::max<std::size_t>(1, n_tasks)));
}

GridSearchResult grid_search(const ModelConfig& base_config, const LaggedDataset& data,
                             const SplitIndices& split, std::span<const double> lr_grid,
                             std::span<const double> lambda_grid,
                             const PenaltyConfig& penalty_template, const TrainConfig& base_train,
                             std::size_t workers) {
    if (lr_grid.empty() || lambda_grid.empty()) {
        throw UsageError("grid_search: grids must be nonempty");
    }

    struct Task {
        ModelConfig cfg;
        double lr = 0.0;
        double lambda = 0.0;
        std::string init_stream;
    };

    const bool component = is_component_wise(base_config.kind);
    std::vector<std::optional<std::size_t>> targets;
    if (component) {
        for (std::size_t i = 0; i < base_config.num_series; ++i) targets.emplace_back(i);
    } else {
        targets.emplace_back(std::nullopt);
    }

    std::vector<Task> tasks;
    for (const auto& target : targets) {
        for (double lambda : lambda_grid) {
            for (double lr : lr_grid) {
                Task task;
                task.cfg = base_config;
                task.cfg.target_index = target;
                task.lr = lr;
                task.lambda = lambda;
                task.init_stream = "init/" + to_string(base_config.kind) +
                                   (target ? "/t" + std::to_string(*target) : "/joint");
                tasks.push_back(std::move(task));
            }
        }
    }

    struct TaskOutcome {
        GridPointResult point;
        TrainResult train_result;
    };
    std::vector<TaskOutcome> outcomes(tasks.size());

    auto run_task = [&](std::size_t idx) {
        const Task& task = tasks[idx];
        RngStream init(base_train.seed, task.init_stream);
        auto model = make_model(task.cfg, init);
        TrainConfig tc = base_train;
        tc.learning_rate = task.lr;
        tc.lambda = task.lambda;
        TrainResult tr = train(*model, data, split, penalty_template, tc);
        GridPointResult point;
        point.target = task.cfg.target_index;
        point.learning_rate = task.lr;
        point.lambda = task.lambda;
        point.val_mse = tr.best_val_mse;
        point.best_epoch = tr.best_epoch;
        point.diverged = tr.diverged;
        outcomes[idx] = {point, std::move(tr)};
    };

    const std::size_t n_workers = resolve_workers(workers, tasks.size());
    if (n_workers <= 1) {
        for (std::size_t i = 0; i < tasks.size(); ++i) run_task(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(n_workers);
        for (std::size_t w = 0; w < n_workers; ++w) {
            pool.emplace_back([&] {
                while (true) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= tasks.size()) return;
                    run_task(i);
                }
            });
        }
        for (auto& t : pool) t.join();
    }

    GridSearchResult result;
    for (const auto& outcome : outcomes) result.points.push_back(outcome.point);

    const std::size_t per_target = lr_grid.size() * lambda_grid.size();
    for (std::size_t ti = 0; ti < targets.size(); ++ti) {
        const std::size_t begin = ti * per_target;
        std::ptrdiff_t best = -1;
        for (std::size_t o = begin; o < begin + per_target; ++o) {
            if (outcomes[o].point.diverged) continue;
            if (best < 0) {
                best = static_cast<std::ptrdiff_t>(o);
                continue;
            }
            const auto& cand = outcomes[o].point;
            const auto& cur = outcomes[static_cast<std::size_t>(best)].point;
            const auto key = [](const GridPointResult& g) {
                return std::tuple(g.val_mse, g.lambda, g.learning_rate);
            };
            if (key(cand) < key(cur)) best = static_cast<std::ptrdiff_t>(o);
        }
        if (best < 0) {
            throw NumericError("grid_search: every grid point diverged for " +
                               (targets[ti] ? "target " + std::to_string(*targets[ti])
                                            : std::string("the joint model")));
        }
        const auto& chosen = outcomes[static_cast<std::size_t>(best)];

        ModelConfig cfg = base_config;
        cfg.target_index = targets[ti];
        RngStream init(base_train.seed, tasks[static_cast<std::size_t>(best)].init_stream);
        auto model = make_model(cfg, init);
        chosen.train_result.restore_best(*model);
        result.models.push_back(std::move(model));
        result.winners.push_back(chosen.point);
        result.winner_histories.push_back(chosen.train_result.history);
    }
    return result;
}

} // namespace granger
