// Command-line experiment runner: synthetic panels, end-to-end GC runs,
// sliding-window analysis, score files, and the gradient self-test.

#include "granger/errors.hpp"
#include "granger/experiment.hpp"
#include "granger/io.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

granger::ExperimentConfig load_config(const std::string& path) {
    if (path.empty()) return granger::ExperimentConfig{};
    return granger::ExperimentConfig::from_json(granger::io::read_json(path));
}

void report_runs(const granger::RunReport& report) {
    std::size_t ok = 0;
    for (const auto& r : report.runs) ok += r.ok ? 1 : 0;
    for (const auto& r : report.runs) {
        if (!r.ok) std::cerr << "failed: " << r.model << " seed " << r.seed << ": " << r.error << "\n";
    }
    std::cout << ok << "/" << report.runs.size() << " runs completed\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Granger-causality discovery with penalized neural and VAR models"};
    app.require_subcommand(1);

    // shared config-file-first options; flags override file values
    std::string config_path;
    std::string outdir;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> models;
    std::size_t workers = 0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "experiment config JSON");
        cmd->add_option("--outdir", outdir, "output directory (overrides config)");
        cmd->add_option("--seeds", seeds, "seeds (overrides config)");
        cmd->add_option("--models", models, "model kinds (overrides config)");
        cmd->add_option("--workers", workers, "worker threads (0 = GRANGER_WORKERS or hardware)");
    };

    CLI::App* simulate = app.add_subcommand("simulate", "emit a synthetic panel + truth CSVs");
    std::string sim_task = "var3";
    std::uint64_t sim_seed = 1;
    std::size_t sim_p = 0, sim_t = 0;
    simulate->add_option("--task", sim_task, "var3 | lorenz96");
    simulate->add_option("--seed", sim_seed, "generator seed");
    simulate->add_option("--p", sim_p, "series count");
    simulate->add_option("--T", sim_t, "panel length");
    add_common(simulate);

    CLI::App* run = app.add_subcommand("run", "run a configured experiment end to end");
    add_common(run);

    CLI::App* sliding = app.add_subcommand("sliding-window",
                                           "windowed GC analysis of a CSV panel");
    std::string panel_path;
    sliding->add_option("--panel", panel_path, "panel CSV (header of series names)");
    add_common(sliding);

    CLI::App* score = app.add_subcommand("score", "metrics from score + truth CSVs");
    std::string scores_csv, truth_csv;
    bool exclude_diagonal = false;
    score->add_option("--scores", scores_csv, "score matrix CSV")->required();
    score->add_option("--truth", truth_csv, "0/1 truth matrix CSV")->required();
    score->add_flag("--exclude-diagonal", exclude_diagonal, "skip self-edges");

    CLI::App* gradcheck = app.add_subcommand("grad-check", "gradient self-test");
    std::size_t gc_points = 100;
    std::uint64_t gc_seed = 7;
    gradcheck->add_option("--points", gc_points, "random points per case");
    gradcheck->add_option("--seed", gc_seed, "probe seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(simulate)) {
            granger::ExperimentConfig cfg = load_config(config_path);
            cfg.task = sim_task;
            if (!outdir.empty()) cfg.outdir = outdir;
            if (sim_p > 0) {
                cfg.var_sim.p = sim_p;
                cfg.lorenz.p = sim_p;
            }
            if (sim_t > 0) {
                cfg.var_sim.T = sim_t;
                cfg.lorenz.T = sim_t;
            }
            granger::write_simulated_panel(cfg, sim_seed);
            std::cout << "panel written to " << cfg.outdir << "\n";
            return 0;
        }
        if (app.got_subcommand(run)) {
            granger::ExperimentConfig cfg = load_config(config_path);
            if (!outdir.empty()) cfg.outdir = outdir;
            if (!seeds.empty()) cfg.seeds = seeds;
            if (!models.empty()) cfg.models = models;
            if (workers > 0) cfg.workers = workers;
            granger::RunReport report = granger::run_experiment(cfg);
            report_runs(report);
            return report.exit_code;
        }
        if (app.got_subcommand(sliding)) {
            granger::ExperimentConfig cfg = load_config(config_path);
            if (config_path.empty()) {
                // windowed-recording defaults: lag 3, cMLPwF, the small grids
                cfg.models = {"cMLPwF"};
                cfg.max_lag = 3;
                cfg.grid.learning_rates = {0.001, 0.01};
                cfg.grid.lambdas = {1e-5, 1e-4, 1e-3, 1e-2};
            }
            if (!panel_path.empty()) cfg.panel_path = panel_path;
            if (!outdir.empty()) cfg.outdir = outdir;
            if (!seeds.empty()) cfg.seeds = seeds;
            if (!models.empty()) cfg.models = models;
            if (workers > 0) cfg.workers = workers;
            granger::RunReport report = granger::run_sliding_window(cfg);
            report_runs(report);
            return report.exit_code;
        }
        if (app.got_subcommand(score)) {
            granger::MetricsConfig metrics;
            metrics.include_diagonal = !exclude_diagonal;
            std::cout << granger::score_files(scores_csv, truth_csv, metrics).dump(2) << "\n";
            return 0;
        }
        if (app.got_subcommand(gradcheck)) {
            granger::GradCheckReport report = granger::run_grad_check(gc_points, gc_seed);
            for (const auto& line : report.lines) std::cout << line << "\n";
            const double worst = std::max(report.max_primitive_error, report.max_model_error);
            std::cout << "max relative error: " << granger::io::format_double(worst) << "\n";
            return worst < 1e-5 ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
