#ifndef GRANGER_EXPERIMENT_HPP
#define GRANGER_EXPERIMENT_HPP

#include "granger/datagen.hpp"
#include "granger/evaluation.hpp"
#include "granger/penalties.hpp"
#include "granger/training.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace granger {

inline constexpr const char* kLibraryVersion = "0.1.0";

struct GridConfig {
    std::vector<double> learning_rates{0.01};
    std::vector<double> lambdas{1e-4};
};

struct MetricsConfig {
    bool include_diagonal = true;
    double threshold = 0.5;
};

struct WindowConfig {
    std::size_t length = 2000;
    double overlap = 0.5;
    double sampling_rate_hz = 100.0;
    double train_fraction = 0.75;
};

/// Full description of an experiment; every design constant that affects a
/// run lives here (or in the nested configs) and is echoed into the outputs.
struct ExperimentConfig {
    std::string task = "var3";  // var3 | lorenz96 | replicated-panel | csv-panel
    std::vector<std::string> models{"VAR"};
    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::string outdir = "out";
    std::size_t max_lag = 5;

    VarSimConfig var_sim;  // per-run seed applied at generation time
    LorenzConfig lorenz;
    std::string panel_path;
    std::string truth_path;

    GridConfig grid;
    std::optional<PenaltyKind> penalty_kind;  // absent: per-model default
    std::optional<double> penalty_alpha;
    std::optional<double> penalty_lambda_q;
    TrainConfig train;  // learning_rate/lambda come from the grid
    MetricsConfig metrics;
    bool scale_inputs = false;
    std::size_t workers = 0;
    WindowConfig window;

    static ExperimentConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    /// Throws ConfigError listing every violated field.
    void validate() const;

    PenaltyConfig penalty_for(ModelKind kind) const;
};

struct RunOutcome {
    std::string model;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    std::optional<double> auroc;
    std::optional<double> aupr;
    double val_mse = 0.0;
    double wall_seconds = 0.0;
};

struct RunReport {
    std::vector<RunOutcome> runs;
    int exit_code = 0;
};

/// Runs the configured task end to end for every (model, seed): generate or
/// load data, split, optionally scale, grid-search, extract GC, score, and
/// write per-run artifacts plus a task-level summary.
RunReport run_experiment(const ExperimentConfig& config);

/// Sliding-window analysis of a CSV panel with chronological 75/25 splits
/// inside each window, per-window grid search, and thresholded GC output.
RunReport run_sliding_window(const ExperimentConfig& config);

/// Generates a synthetic panel and writes panel/truth CSVs into outdir.
void write_simulated_panel(const ExperimentConfig& config, std::uint64_t seed);

/// Metrics from a score CSV and a truth CSV.
nlohmann::json score_files(const std::filesystem::path& scores_csv,
                           const std::filesystem::path& truth_csv, const MetricsConfig& metrics);

/// Gradient self-test over all primitives and model kinds; returns the
/// maximum relative error observed (must stay below 1e-5).
struct GradCheckReport {
    double max_primitive_error = 0.0;
    double max_model_error = 0.0;
    std::vector<std::string> lines;
};
GradCheckReport run_grad_check(std::size_t points_per_case, std::uint64_t seed);

} // namespace granger

#endif
