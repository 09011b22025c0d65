#include "granger/experiment.hpp"

#include "granger/errors.hpp"
#include "granger/grad_check.hpp"
#include "granger/io.hpp"

#include <chrono>
#include <cmath>
#include <iostream>
#include <map>
#include <set>

namespace granger {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig cfg;
    cfg.task = j.value("task", cfg.task);
    if (j.contains("models")) cfg.models = j.at("models").get<std::vector<std::string>>();
    if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    cfg.outdir = j.value("outdir", cfg.outdir);
    cfg.max_lag = j.value("max_lag", cfg.max_lag);

    if (j.contains("data")) {
        const json& d = j.at("data");
        cfg.var_sim.p = d.value("p", cfg.var_sim.p);
        cfg.var_sim.T = d.value("T", cfg.var_sim.T);
        if (d.contains("causal_lags")) {
            cfg.var_sim.causal_lags = d.at("causal_lags").get<std::vector<std::size_t>>();
        }
        cfg.var_sim.density = d.value("density", cfg.var_sim.density);
        cfg.var_sim.coeff = d.value("coeff", cfg.var_sim.coeff);
        cfg.var_sim.noise_sd = d.value("noise_sd", cfg.var_sim.noise_sd);
        cfg.lorenz.p = d.value("p", cfg.lorenz.p);
        cfg.lorenz.T = d.value("T", cfg.lorenz.T);
        cfg.lorenz.forcing = d.value("F", cfg.lorenz.forcing);
        cfg.lorenz.dt_record = d.value("dt_record", cfg.lorenz.dt_record);
        cfg.panel_path = d.value("panel_path", cfg.panel_path);
        cfg.truth_path = d.value("truth_path", cfg.truth_path);
    }
    if (j.contains("grid")) {
        const json& g = j.at("grid");
        if (g.contains("learning_rates")) {
            cfg.grid.learning_rates = g.at("learning_rates").get<std::vector<double>>();
        }
        if (g.contains("lambdas")) cfg.grid.lambdas = g.at("lambdas").get<std::vector<double>>();
    }
    if (j.contains("penalty")) {
        const json& p = j.at("penalty");
        if (p.contains("kind")) {
            cfg.penalty_kind = penalty_kind_from_string(p.at("kind").get<std::string>());
        }
        if (p.contains("alpha")) cfg.penalty_alpha = p.at("alpha").get<double>();
        if (p.contains("lambda_q")) cfg.penalty_lambda_q = p.at("lambda_q").get<double>();
    }
    if (j.contains("train")) {
        const json& t = j.at("train");
        cfg.train.epochs = t.value("epochs", cfg.train.epochs);
        cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
        cfg.train.val_fraction = t.value("val_fraction", cfg.train.val_fraction);
        cfg.train.adam_beta1 = t.value("adam_beta1", cfg.train.adam_beta1);
        cfg.train.adam_beta2 = t.value("adam_beta2", cfg.train.adam_beta2);
        cfg.train.adam_eps = t.value("adam_eps", cfg.train.adam_eps);
    }
    if (j.contains("metrics")) {
        const json& m = j.at("metrics");
        cfg.metrics.include_diagonal = m.value("include_diagonal", cfg.metrics.include_diagonal);
        cfg.metrics.threshold = m.value("threshold", cfg.metrics.threshold);
    }
    cfg.scale_inputs = j.value("scale_inputs", cfg.scale_inputs);
    cfg.workers = j.value("workers", cfg.workers);
    if (j.contains("window")) {
        const json& w = j.at("window");
        cfg.window.length = w.value("length", cfg.window.length);
        cfg.window.overlap = w.value("overlap", cfg.window.overlap);
        cfg.window.sampling_rate_hz = w.value("sampling_rate_hz", cfg.window.sampling_rate_hz);
        cfg.window.train_fraction = w.value("train_fraction", cfg.window.train_fraction);
    }
    return cfg;
}

json ExperimentConfig::to_json() const {
    json j;
    j["task"] = task;
    j["models"] = models;
    j["seeds"] = seeds;
    j["outdir"] = outdir;
    j["max_lag"] = max_lag;
    j["data"] = {
        {"p", task == "lorenz96" ? lorenz.p : var_sim.p},
        {"T", task == "lorenz96" ? lorenz.T : var_sim.T},
        {"causal_lags", var_sim.causal_lags},
        {"density", var_sim.density},
        {"coeff", var_sim.coeff},
        {"noise_sd", var_sim.noise_sd},
        {"var_burn_in", var_sim.burn_in},
        {"stability_radius", var_sim.stability_radius},
        {"F", lorenz.forcing},
        {"dt_record", lorenz.dt_record},
        {"lorenz_burn_in", lorenz.burn_in},
        {"lorenz_substeps", lorenz.substeps},
        {"lorenz_init_perturb_sd", lorenz.init_perturb_sd},
        {"lorenz_measurement_noise_sd", lorenz.measurement_noise_sd},
        {"panel_path", panel_path},
        {"truth_path", truth_path},
    };
    j["grid"] = {{"learning_rates", grid.learning_rates}, {"lambdas", grid.lambdas}};
    json pen = json::object();
    if (penalty_kind) pen["kind"] = to_string(*penalty_kind);
    if (penalty_alpha) pen["alpha"] = *penalty_alpha;
    if (penalty_lambda_q) pen["lambda_q"] = *penalty_lambda_q;
    j["penalty"] = pen;
    j["train"] = {
        {"epochs", train.epochs},
        {"batch_size", train.batch_size},
        {"val_fraction", train.val_fraction},
        {"adam_beta1", train.adam_beta1},
        {"adam_beta2", train.adam_beta2},
        {"adam_eps", train.adam_eps},
    };
    j["metrics"] = {{"include_diagonal", metrics.include_diagonal},
                    {"threshold", metrics.threshold}};
    j["scale_inputs"] = scale_inputs;
    j["workers"] = workers;
    j["window"] = {{"length", window.length},
                   {"overlap", window.overlap},
                   {"sampling_rate_hz", window.sampling_rate_hz},
                   {"train_fraction", window.train_fraction}};
    j["library_version"] = kLibraryVersion;
    return j;
}

void ExperimentConfig::validate() const {
    std::string problems;
    const std::set<std::string> tasks{"var3", "lorenz96", "replicated-panel", "csv-panel"};
    if (!tasks.count(task)) problems += "task '" + task + "' unknown; ";
    if (models.empty()) problems += "models must be nonempty; ";
    for (const auto& m : models) {
        try {
            parse_model_spec(m);
        } catch (const ConfigError& e) {
            problems += std::string(e.what()) + "; ";
        }
    }
    if (seeds.empty()) problems += "seeds must be nonempty; ";
    if (max_lag < 1) problems += "max_lag must be >= 1; ";
    if (grid.learning_rates.empty()) problems += "grid.learning_rates must be nonempty; ";
    if (grid.lambdas.empty()) problems += "grid.lambdas must be nonempty; ";
    for (double lr : grid.learning_rates) {
        if (lr <= 0.0) {
            problems += "learning rates must be positive; ";
            break;
        }
    }
    for (double l : grid.lambdas) {
        if (l < 0.0) {
            problems += "lambdas must be nonnegative; ";
            break;
        }
    }
    try {
        TrainConfig t = train;
        t.learning_rate = grid.learning_rates.empty() ? 0.01 : grid.learning_rates.front();
        t.validate();
    } catch (const ConfigError& e) {
        problems += std::string(e.what()) + "; ";
    }
    if (metrics.threshold < 0.0 || metrics.threshold > 1.0) {
        problems += "metrics.threshold must lie in [0,1]; ";
    }
    if (task == "replicated-panel" || task == "csv-panel") {
        if (panel_path.empty()) {
            problems += "panel_path required for task " + task + "; ";
        } else if (!fs::exists(panel_path)) {
            problems += "panel_path does not exist: " + panel_path + "; ";
        }
        if (!truth_path.empty() && !fs::exists(truth_path)) {
            problems += "truth_path does not exist: " + truth_path + "; ";
        }
    }
    if (task == "var3") {
        if (var_sim.density <= 0.0 || var_sim.density > 1.0) {
            problems += "data.density must lie in (0,1]; ";
        }
        if (var_sim.causal_lags.empty()) problems += "data.causal_lags must be nonempty; ";
    }
    if (window.length < 2) problems += "window.length must be >= 2; ";
    if (window.overlap < 0.0 || window.overlap >= 1.0) problems += "window.overlap must lie in [0,1); ";
    if (window.sampling_rate_hz <= 0.0) problems += "window.sampling_rate_hz must be positive; ";
    if (window.train_fraction <= 0.0 || window.train_fraction >= 1.0) {
        problems += "window.train_fraction must lie in (0,1); ";
    }
    if (!problems.empty()) throw ConfigError("ExperimentConfig: " + problems);
}

PenaltyConfig ExperimentConfig::penalty_for(ModelKind kind) const {
    PenaltyConfig pc;
    pc.kind = penalty_kind.value_or(default_penalty_kind(kind));
    if (pc.kind == PenaltyKind::sparse_group_lasso) {
        pc.alpha = penalty_alpha.value_or(0.5);
    }
    if (pc.kind == PenaltyKind::decoupled_l1 && penalty_lambda_q) pc.lambda_q = *penalty_lambda_q;
    return pc;
}

// ---------------------------------------------------------------------------
// Shared run helpers
// ---------------------------------------------------------------------------

namespace {

std::string seconds_label(double s) {
    std::string text = io::format_double(s);
    for (char& c : text) {
        if (c == '.') c = 'p';
    }
    return text;
}

std::string render_history_csv(const TrainHistory& history) {
    std::string out = "epoch,data_loss,penalty,val_mse,seconds\n";
    for (std::size_t e = 0; e < history.epochs.size(); ++e) {
        const EpochStats& s = history.epochs[e];
        out += std::to_string(e + 1) + ',' + io::format_double(s.data_loss) + ',' +
               io::format_double(s.penalty) + ',' + io::format_double(s.val_mse) + ',' +
               io::format_double(s.seconds) + '\n';
    }
    return out;
}

TrainHistory mean_history(const std::vector<TrainHistory>& histories) {
    TrainHistory out;
    std::size_t longest = 0;
    for (const auto& h : histories) longest = std::max(longest, h.epochs.size());
    for (std::size_t e = 0; e < longest; ++e) {
        EpochStats acc;
        std::size_t n = 0;
        for (const auto& h : histories) {
            if (e >= h.epochs.size()) continue;
            acc.data_loss += h.epochs[e].data_loss;
            acc.penalty += h.epochs[e].penalty;
            acc.val_mse += h.epochs[e].val_mse;
            acc.seconds += h.epochs[e].seconds;  // total compute across targets
            ++n;
        }
        if (n == 0) break;
        acc.data_loss /= static_cast<double>(n);
        acc.penalty /= static_cast<double>(n);
        acc.val_mse /= static_cast<double>(n);
        out.epochs.push_back(acc);
    }
    return out;
}

json grid_point_json(const GridPointResult& g) {
    json j;
    if (g.target) j["target"] = *g.target;
    j["learning_rate"] = g.learning_rate;
    j["lambda"] = g.lambda;
    j["val_mse"] = g.val_mse;
    j["best_epoch"] = g.best_epoch;
    j["diverged"] = g.diverged;
    return j;
}

struct PreparedData {
    TimeSeriesPanel panel;
    LaggedDataset lagged;
    SplitIndices split;
    std::optional<ScalerStats> scaler;
};

PreparedData prepare_data(const ExperimentConfig& cfg, std::uint64_t seed) {
    PreparedData out;
    if (cfg.task == "var3") {
        VarSimConfig c = cfg.var_sim;
        c.seed = seed;
        out.panel = simulate_var(c);
    } else if (cfg.task == "lorenz96") {
        LorenzConfig c = cfg.lorenz;
        c.seed = seed;
        out.panel = simulate_lorenz96(c);
    } else if (cfg.task == "replicated-panel") {
        out.panel = load_replicated_panel(cfg.panel_path,
                                          cfg.truth_path.empty() ? fs::path{} : fs::path(cfg.truth_path));
    } else if (cfg.task == "csv-panel") {
        out.panel = load_panel_csv(cfg.panel_path,
                                   cfg.truth_path.empty() ? fs::path{} : fs::path(cfg.truth_path));
    } else {
        throw ConfigError("unknown task: " + cfg.task);
    }
    out.lagged = make_lagged(out.panel, cfg.max_lag);
    out.split = train_val_split(out.lagged.size(), cfg.train.val_fraction, seed);
    if (cfg.scale_inputs) {
        auto [scaled, stats] = standard_scale(out.lagged, out.split.train);
        out.lagged = std::move(scaled);
        out.scaler = std::move(stats);
    }
    return out;
}

struct Aggregate {
    double mean = 0.0;
    std::optional<double> sd;
};

Aggregate aggregate(const std::vector<double>& xs) {
    Aggregate a;
    if (xs.empty()) return a;
    for (double x : xs) a.mean += x;
    a.mean /= static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - a.mean) * (x - a.mean);
        a.sd = std::sqrt(ss / (static_cast<double>(xs.size()) - 1.0));
    }
    return a;
}

} // namespace

// ---------------------------------------------------------------------------
// run_experiment
// ---------------------------------------------------------------------------

RunReport run_experiment(const ExperimentConfig& config) {
    config.validate();
    RunReport report;
    const fs::path task_dir = fs::path(config.outdir) / config.task;

    std::map<std::uint64_t, PreparedData> data_cache;
    auto data_for = [&](std::uint64_t seed) -> PreparedData& {
        auto it = data_cache.find(seed);
        if (it == data_cache.end()) it = data_cache.emplace(seed, prepare_data(config, seed)).first;
        return it->second;
    };

    for (const std::string& spec : config.models) {
        auto [kind, small] = parse_model_spec(spec);
        for (std::uint64_t seed : config.seeds) {
            RunOutcome outcome;
            outcome.model = spec;
            outcome.seed = seed;
            const auto t0 = std::chrono::steady_clock::now();
            try {
                PreparedData& data = data_for(seed);
                const std::size_t p = data.panel.num_series();
                ModelConfig base = ModelConfig::make(kind, p, config.max_lag, small);
                PenaltyConfig penalty = config.penalty_for(kind);
                TrainConfig tc = config.train;
                tc.seed = seed;

                GridSearchResult search =
                    grid_search(base, data.lagged, data.split, config.grid.learning_rates,
                                config.grid.lambdas, penalty, tc, config.workers);

                GCEstimate estimate = is_component_wise(kind)
                                          ? extract_gc(std::span<const std::unique_ptr<Model>>(
                                                search.models.data(), search.models.size()))
                                          : extract_gc(*search.models.front());
                estimate = threshold_gc(estimate, config.metrics.threshold);

                double val_sum = 0.0;
                for (const auto& w : search.winners) val_sum += w.val_mse;
                outcome.val_mse = val_sum / static_cast<double>(search.winners.size());

                if (data.panel.truth) {
                    try {
                        FlatScores flat = flatten_scores(estimate.series_scores,
                                                         *data.panel.truth,
                                                         MetricFlags{config.metrics.include_diagonal});
                        outcome.auroc = auroc(flat.scores, flat.labels);
                        outcome.aupr = aupr(flat.scores, flat.labels);
                    } catch (const MetricError&) {
                        // single-class truth: metrics stay unset
                    }
                }

                const fs::path run_dir = task_dir / spec / std::to_string(seed);
                fs::create_directories(run_dir);
                io::write_matrix_csv(run_dir / "gc_scores.csv", estimate.series_scores);
                io::write_matrix_csv(run_dir / "gc_scaled.csv", *estimate.scaled);
                io::write_matrix_csv(run_dir / "gc_binary.csv", *estimate.binary);
                if (estimate.lag_scores) {
                    std::vector<std::string> header;
                    for (std::size_t k = 1; k <= estimate.lag_scores->cols; ++k) {
                        header.push_back("lag" + std::to_string(k));
                    }
                    io::write_matrix_csv(run_dir / "lag_scores.csv", *estimate.lag_scores, header);
                }
                if (data.panel.truth) {
                    io::write_matrix_csv(run_dir / "truth.csv", *data.panel.truth);
                }
                if (data.panel.truth_lags) {
                    io::write_matrix_csv(run_dir / "truth_lags.csv", *data.panel.truth_lags);
                }
                io::write_text_atomic(run_dir / "history.csv",
                                      render_history_csv(mean_history(search.winner_histories)));
                if (search.winner_histories.size() > 1) {
                    for (std::size_t t = 0; t < search.winner_histories.size(); ++t) {
                        io::write_text_atomic(run_dir / ("history_t" + std::to_string(t) + ".csv"),
                                              render_history_csv(search.winner_histories[t]));
                    }
                }
                {
                    json ckpt;
                    ckpt["models"] = json::array();
                    for (auto& m : search.models) ckpt["models"].push_back(model_to_json(*m, seed));
                    io::write_json_atomic(run_dir / "checkpoints.json", ckpt);
                }

                outcome.wall_seconds =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

                json results;
                results["task"] = config.task;
                results["model"] = spec;
                results["seed"] = seed;
                json sel = json::array();
                for (const auto& w : search.winners) sel.push_back(grid_point_json(w));
                results["selection"] = sel;
                json pts = json::array();
                for (const auto& g : search.points) pts.push_back(grid_point_json(g));
                results["grid_points"] = pts;
                results["val_mse"] = outcome.val_mse;
                json met;
                met["include_diagonal"] = config.metrics.include_diagonal;
                met["threshold"] = config.metrics.threshold;
                if (outcome.auroc) met["auroc"] = *outcome.auroc;
                if (outcome.aupr) met["aupr"] = *outcome.aupr;
                results["metrics"] = met;
                results["wall_time_s"] = outcome.wall_seconds;
                results["provenance"] = config.to_json();
                io::write_json_atomic(run_dir / "results.json", results);

                outcome.ok = true;
            } catch (const std::exception& e) {
                outcome.ok = false;
                outcome.error = e.what();
                report.exit_code = 1;
            }
            report.runs.push_back(std::move(outcome));
        }
    }

    // task-level summary: mean +/- sample sd across seeds per model
    json summary;
    summary["task"] = config.task;
    json models = json::object();
    for (const std::string& spec : config.models) {
        std::vector<double> aurocs, auprs, vals;
        json per_seed = json::array();
        for (const RunOutcome& r : report.runs) {
            if (r.model != spec) continue;
            json row;
            row["seed"] = r.seed;
            row["ok"] = r.ok;
            if (!r.ok) row["error"] = r.error;
            if (r.auroc) {
                row["auroc"] = *r.auroc;
                aurocs.push_back(*r.auroc);
            }
            if (r.aupr) {
                row["aupr"] = *r.aupr;
                auprs.push_back(*r.aupr);
            }
            if (r.ok) {
                row["val_mse"] = r.val_mse;
                vals.push_back(r.val_mse);
            }
            per_seed.push_back(std::move(row));
        }
        json m;
        m["per_seed"] = per_seed;
        auto emit = [&m](const char* name, const Aggregate& a, bool has) {
            if (!has) return;
            m[std::string(name) + "_mean"] = a.mean;
            if (a.sd) m[std::string(name) + "_sd"] = *a.sd;
        };
        emit("auroc", aggregate(aurocs), !aurocs.empty());
        emit("aupr", aggregate(auprs), !auprs.empty());
        emit("val_mse", aggregate(vals), !vals.empty());
        models[spec] = std::move(m);
    }
    summary["models"] = std::move(models);
    summary["provenance"] = config.to_json();
    fs::create_directories(task_dir);
    io::write_json_atomic(task_dir / "summary.json", summary);
    return report;
}

// ---------------------------------------------------------------------------
// run_sliding_window
// ---------------------------------------------------------------------------

RunReport run_sliding_window(const ExperimentConfig& config) {
    ExperimentConfig cfg = config;
    if (cfg.task != "csv-panel") cfg.task = "csv-panel";  // panel source for windows
    cfg.validate();

    RunReport report;
    const std::string spec = cfg.models.front();
    auto [kind, small] = parse_model_spec(spec);
    if (!is_component_wise(kind)) {
        throw ConfigError("sliding-window analysis trains component-wise models; got " + spec);
    }

    TimeSeriesPanel panel = load_panel_csv(cfg.panel_path,
                                           cfg.truth_path.empty() ? fs::path{} : fs::path(cfg.truth_path));
    std::vector<WindowSlice> windows = sliding_windows(panel, cfg.window.length,
                                                       cfg.window.overlap,
                                                       cfg.window.sampling_rate_hz);
    if (windows.size() < 2) {
        std::cerr << "warning: only " << windows.size()
                  << " window(s) fit the panel; proceeding\n";
    }

    const std::uint64_t seed = cfg.seeds.front();
    const fs::path out_dir = fs::path(cfg.outdir) / "sliding-window" / spec;
    fs::create_directories(out_dir);

    std::string long_csv = "window_start_s,cause,effect,score,binary\n";
    json window_summaries = json::array();

    for (std::size_t wi = 0; wi < windows.size(); ++wi) {
        RunOutcome outcome;
        outcome.model = spec;
        outcome.seed = seed;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            const WindowSlice& slice = windows[wi];
            LaggedDataset lagged = make_lagged(slice.panel, cfg.max_lag);
            SplitIndices split = chronological_split(lagged.size(), cfg.window.train_fraction);
            auto [scaled, stats] = standard_scale(lagged, split.train);

            ModelConfig base = ModelConfig::make(kind, slice.panel.num_series(), cfg.max_lag, small);
            PenaltyConfig penalty = cfg.penalty_for(kind);
            TrainConfig tc = cfg.train;
            tc.seed = derive_seed(seed, "window/" + std::to_string(wi));

            GridSearchResult search =
                grid_search(base, scaled, split, cfg.grid.learning_rates, cfg.grid.lambdas,
                            penalty, tc, cfg.workers);
            GCEstimate estimate = extract_gc(std::span<const std::unique_ptr<Model>>(
                search.models.data(), search.models.size()));
            estimate = threshold_gc(estimate, cfg.metrics.threshold);

            const std::string label = seconds_label(slice.start_seconds);
            io::write_matrix_csv(out_dir / ("scores_" + label + "s.csv"), *estimate.scaled);
            io::write_matrix_csv(out_dir / ("binary_" + label + "s.csv"), *estimate.binary);

            const std::size_t p = slice.panel.num_series();
            for (std::size_t i = 0; i < p; ++i) {
                for (std::size_t j = 0; j < p; ++j) {
                    long_csv += io::format_double(slice.start_seconds) + ',' +
                                slice.panel.series_names[j] + ',' + slice.panel.series_names[i] +
                                ',' + io::format_double(estimate.scaled->at(i, j)) + ',' +
                                io::format_double(estimate.binary->at(i, j)) + '\n';
                }
            }

            double val_sum = 0.0;
            for (const auto& w : search.winners) val_sum += w.val_mse;
            outcome.val_mse = val_sum / static_cast<double>(search.winners.size());
            outcome.wall_seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            outcome.ok = true;

            json wj;
            wj["window_index"] = wi;
            wj["start_sample"] = slice.start_sample;
            wj["start_seconds"] = slice.start_seconds;
            wj["train_rows"] = split.train.size();
            wj["val_rows"] = split.val.size();
            wj["val_mse"] = outcome.val_mse;
            json sel = json::array();
            for (const auto& w : search.winners) sel.push_back(grid_point_json(w));
            wj["selection"] = sel;
            window_summaries.push_back(std::move(wj));
        } catch (const std::exception& e) {
            outcome.ok = false;
            outcome.error = e.what();
            report.exit_code = 1;
        }
        report.runs.push_back(std::move(outcome));
    }

    io::write_text_atomic(out_dir / "gc_long.csv", long_csv);
    json summary;
    summary["windows"] = window_summaries;
    summary["num_windows"] = windows.size();
    summary["provenance"] = cfg.to_json();
    io::write_json_atomic(out_dir / "summary.json", summary);
    return report;
}

// ---------------------------------------------------------------------------
// simulate / score / grad-check entry points
// ---------------------------------------------------------------------------

void write_simulated_panel(const ExperimentConfig& config, std::uint64_t seed) {
    TimeSeriesPanel panel;
    if (config.task == "var3") {
        VarSimConfig c = config.var_sim;
        c.seed = seed;
        panel = simulate_var(c);
    } else if (config.task == "lorenz96") {
        LorenzConfig c = config.lorenz;
        c.seed = seed;
        panel = simulate_lorenz96(c);
    } else {
        throw ConfigError("simulate supports tasks var3 and lorenz96, got " + config.task);
    }
    const fs::path dir = fs::path(config.outdir);
    fs::create_directories(dir);
    io::write_matrix_csv(dir / "panel.csv", panel.data, panel.series_names);
    if (panel.truth) io::write_matrix_csv(dir / "truth.csv", *panel.truth);
    if (panel.truth_lags) io::write_matrix_csv(dir / "truth_lags.csv", *panel.truth_lags);
}

json score_files(const fs::path& scores_csv, const fs::path& truth_csv,
                 const MetricsConfig& metrics) {
    Matrix scores = io::read_csv(scores_csv).data;
    Matrix truth = io::read_csv(truth_csv).data;
    FlatScores flat = flatten_scores(scores, truth, MetricFlags{metrics.include_diagonal});
    json j;
    j["auroc"] = auroc(flat.scores, flat.labels);
    j["aupr"] = aupr(flat.scores, flat.labels);
    j["include_diagonal"] = metrics.include_diagonal;
    j["entries"] = flat.scores.size();
    std::size_t positives = 0;
    for (auto l : flat.labels) positives += l;
    j["positives"] = positives;
    return j;
}

// ---------------------------------------------------------------------------
// Gradient self-test
// ---------------------------------------------------------------------------

namespace {

using ad::Tape;
using ad::Tensor;
using ad::Var;

Tensor random_tensor(std::vector<std::size_t> shape, RngStream& rng, double lo = -2.0,
                     double hi = 2.0) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.values) v = rng.uniform(lo, hi);
    return t;
}

/// Random values in [-2, -0.25] u [0.25, 2]: keeps norms and denominators
/// away from the non-smooth / degenerate region.
Tensor random_tensor_bounded_away(std::vector<std::size_t> shape, RngStream& rng) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.values) {
        double mag = rng.uniform(0.25, 2.0);
        v = rng.sign() * mag;
    }
    return t;
}

struct PrimitiveCase {
    std::string name;
    std::function<double(RngStream&)> run;  // one random point -> max rel error
};

} // namespace

GradCheckReport run_grad_check(std::size_t points_per_case, std::uint64_t seed) {
    GradCheckReport report;
    constexpr double kStep = 1e-5;

    std::vector<PrimitiveCase> cases;
    auto add_case = [&](std::string name, std::function<double(RngStream&)> fn) {
        cases.push_back({std::move(name), std::move(fn)});
    };

    add_case("add", [](RngStream& rng) {
        Tensor x = random_tensor({2, 3}, rng);
        Tensor c = random_tensor({2, 3}, rng), d = random_tensor({2, 3}, rng);
        return ad::grad_check(
            [&](Tape& t, Var v) { return t.mse(t.add(v, t.constant(c)), t.constant(d)); }, x, kStep);
    });
    add_case("add-row-broadcast", [](RngStream& rng) {
        Tensor x = random_tensor({1, 3}, rng);
        Tensor c = random_tensor({4, 3}, rng), d = random_tensor({4, 3}, rng);
        return ad::grad_check(
            [&](Tape& t, Var v) { return t.mse(t.add(t.constant(c), v), t.constant(d)); }, x, kStep);
    });
    add_case("subtract", [](RngStream& rng) {
        Tensor x = random_tensor({2, 3}, rng);
        Tensor c = random_tensor({2, 3}, rng), d = random_tensor({2, 3}, rng);
        return ad::grad_check(
            [&](Tape& t, Var v) { return t.mse(t.sub(v, t.constant(c)), t.constant(d)); }, x, kStep);
    });
    add_case("elementwise-multiply", [](RngStream& rng) {
        Tensor x = random_tensor({2, 3}, rng);
        Tensor c = random_tensor({2, 3}, rng), d = random_tensor({2, 3}, rng);
        return ad::grad_check(
            [&](Tape& t, Var v) { return t.mse(t.mul(t.constant(c), v), t.constant(d)); }, x, kStep);
    });
    add_case("elementwise-divide", [](RngStream& rng) {
        Tensor x = random_tensor_bounded_away({2, 3}, rng);
        Tensor c = random_tensor({2, 3}, rng), d = random_tensor({2, 3}, rng);
        return ad::grad_check(
            [&](Tape& t, Var v) { return t.mse(t.div(t.constant(c), v), t.constant(d)); }, x, kStep);
    });
    add_case("divide-by-scalar-norm", [](RngStream& rng) {
        Tensor x = random_tensor_bounded_away({5}, rng);
        return ad::grad_check(
            [&](Tape& t, Var v) { return t.group_norm(t.div(v, t.group_norm(v))); }, x, kStep);
    });
    add_case("scalar-multiply", [](RngStream& rng) {
        Tensor x = random_tensor({2, 3}, rng);
        Tensor d = random_tensor({2, 3}, rng);
        return ad::grad_check(
            [&](Tape& t, Var v) { return t.mse(t.scalar_mul(v, 1.7), t.constant(d)); }, x, kStep);
    });
    add_case("matrix-multiply", [](RngStream& rng) {
        Tensor x = random_tensor({2, 3}, rng);
        Tensor c = random_tensor({3, 2}, rng), d = random_tensor({2, 2}, rng);
        return ad::grad_check(
            [&](Tape& t, Var v) { return t.mse(t.matmul(v, t.constant(c)), t.constant(d)); }, x,
            kStep);
    });
    add_case("matrix-multiply-rhs", [](RngStream& rng) {
        Tensor x = random_tensor({3, 2}, rng);
        Tensor c = random_tensor({2, 3}, rng), d = random_tensor({2, 2}, rng);
        return ad::grad_check(
            [&](Tape& t, Var v) { return t.mse(t.matmul(t.constant(c), v), t.constant(d)); }, x,
            kStep);
    });
    add_case("sigmoid", [](RngStream& rng) {
        Tensor x = random_tensor({2, 3}, rng);
        Tensor d = random_tensor({2, 3}, rng);
        return ad::grad_check(
            [&](Tape& t, Var v) { return t.mse(t.sigmoid(v), t.constant(d)); }, x, kStep);
    });
    add_case("tanh", [](RngStream& rng) {
        Tensor x = random_tensor({2, 3}, rng);
        Tensor d = random_tensor({2, 3}, rng);
        return ad::grad_check(
            [&](Tape& t, Var v) { return t.mse(t.tanh(v), t.constant(d)); }, x, kStep);
    });
    add_case("L2-norm-of-group", [](RngStream& rng) {
        Tensor x = random_tensor_bounded_away({6}, rng);
        return ad::grad_check([&](Tape& t, Var v) { return t.group_norm(v); }, x, kStep);
    });
    add_case("squared-error-mean", [](RngStream& rng) {
        Tensor x = random_tensor({2, 3}, rng);
        Tensor c = random_tensor({2, 3}, rng);
        return ad::grad_check([&](Tape& t, Var v) { return t.mse(v, t.constant(c)); }, x, kStep);
    });
    add_case("concatenate+slice", [](RngStream& rng) {
        Tensor x = random_tensor_bounded_away({6}, rng);
        return ad::grad_check(
            [&](Tape& t, Var v) {
                std::vector<Var> parts{t.slice(v, 0, 2), t.slice(v, 2, 4)};
                return t.group_norm(t.concat(parts));
            },
            x, kStep);
    });
    add_case("slice-columns", [](RngStream& rng) {
        Tensor x = random_tensor({3, 4}, rng);
        Tensor d = random_tensor({3, 2}, rng);
        return ad::grad_check(
            [&](Tape& t, Var v) { return t.mse(t.slice_cols(v, 1, 2), t.constant(d)); }, x, kStep);
    });
    add_case("reshape", [](RngStream& rng) {
        Tensor x = random_tensor({2, 3}, rng);
        Tensor d = random_tensor({3, 2}, rng);
        return ad::grad_check(
            [&](Tape& t, Var v) { return t.mse(t.reshape(v, {3, 2}), t.constant(d)); }, x, kStep);
    });
    add_case("penalties", [](RngStream& rng) {
        // group lasso + sparse + hierarchical over random non-degenerate groups
        Tensor x = random_tensor_bounded_away({12}, rng);
        return ad::grad_check(
            [&](Tape& t, Var v) {
                std::vector<PenaltyGroup> groups;
                for (std::size_t g = 0; g < 2; ++g) {
                    PenaltyGroup pg;
                    pg.name = "g" + std::to_string(g);
                    pg.lag_parts = {t.slice(v, g * 6, 3), t.slice(v, g * 6 + 3, 3)};
                    pg.whole = t.concat(pg.lag_parts);
                    groups.push_back(std::move(pg));
                }
                Var a = group_lasso(t, groups);
                Var b = sparse_group_lasso(t, groups, 0.5);
                Var c = hierarchical_group_lasso(t, groups);
                return t.add(t.add(a, b), c);
            },
            x, kStep);
    });

    for (const auto& c : cases) {
        double worst = 0.0;
        RngStream rng(seed, "gradcheck/primitive/" + c.name);
        for (std::size_t i = 0; i < points_per_case; ++i) worst = std::max(worst, c.run(rng));
        report.max_primitive_error = std::max(report.max_primitive_error, worst);
        report.lines.push_back("primitive " + c.name + ": max rel err " + io::format_double(worst));
    }

    // every model kind: loss = mse + penalty at random parameters
    const std::vector<ModelKind> kinds{ModelKind::var,     ModelKind::lekvar,
                                       ModelKind::cmlp,    ModelKind::cmlp_wf,
                                       ModelKind::clstm,   ModelKind::clstm_wf};
    for (ModelKind kind : kinds) {
        const std::size_t p = 3, lags = 2, batch = 3;
        double worst = 0.0;
        RngStream rng(seed, "gradcheck/model/" + to_string(kind));
        for (std::size_t point = 0; point < points_per_case; ++point) {
            ModelConfig cfg = ModelConfig::make(kind, p, lags);
            if (is_component_wise(kind)) {
                cfg.target_index = point % p;
                cfg.hidden_layers = {4, 3};
            }
            RngStream init(seed, "gradcheck/init/" + to_string(kind) + "/" +
                                     std::to_string(point));
            auto model = make_model(cfg, init);
            for (ad::Tensor* t : model->parameter_tensors()) {
                for (double& v : t->values) {
                    double mag = init.uniform(0.3, 1.2);
                    v = init.sign() * mag;
                }
            }
            Tensor inputs = random_tensor({batch, p * lags}, rng);
            Tensor targets = random_tensor({batch, model->output_width()}, rng);
            PenaltyConfig penalty;
            penalty.kind = default_penalty_kind(kind);
            penalty.lambda = 0.3;

            auto build = [&](Tape& tape) {
                Var x = tape.constant(inputs);
                Var data_term = tape.mse(model->forward(tape, x), tape.constant(targets));
                auto groups = model->penalized_groups(tape);
                return tape.add(data_term, penalty_term(tape, groups, penalty));
            };
            worst = std::max(worst,
                             ad::grad_check_params(build, model->parameter_tensors(), kStep));
        }
        report.max_model_error = std::max(report.max_model_error, worst);
        report.lines.push_back("model " + to_string(kind) + ": max rel err " +
                               io::format_double(worst));
    }
    return report;
}

} // namespace granger
