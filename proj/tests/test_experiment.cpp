#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "granger/errors.hpp"
#include "granger/experiment.hpp"
#include "granger/io.hpp"

#include <filesystem>
#include <fstream>

using namespace granger;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("granger_exp_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

ExperimentConfig tiny_var_config(const fs::path& outdir) {
    ExperimentConfig cfg;
    cfg.task = "var3";
    cfg.models = {"VAR", "cMLP_s"};
    cfg.seeds = {1, 2};
    cfg.outdir = outdir.string();
    cfg.max_lag = 2;
    cfg.var_sim.p = 3;
    cfg.var_sim.T = 60;
    cfg.var_sim.causal_lags = {1, 2};
    cfg.grid.learning_rates = {0.05};
    cfg.grid.lambdas = {1e-4};
    cfg.train.epochs = 5;
    cfg.train.batch_size = 64;
    cfg.workers = 1;
    return cfg;
}

} // namespace

TEST_CASE("experiment config JSON round trip and validation") {
    ExperimentConfig cfg = tiny_var_config(fresh_dir("cfg"));
    nlohmann::json j = cfg.to_json();
    ExperimentConfig back = ExperimentConfig::from_json(j);
    CHECK(back.task == cfg.task);
    CHECK(back.models == cfg.models);
    CHECK(back.seeds == cfg.seeds);
    CHECK(back.max_lag == cfg.max_lag);
    CHECK(back.var_sim.T == cfg.var_sim.T);
    CHECK(back.grid.lambdas == cfg.grid.lambdas);
    CHECK(back.train.epochs == cfg.train.epochs);

    SUBCASE("unknown model kind fails validation before any output") {
        ExperimentConfig bad = cfg;
        bad.models = {"cGRU"};
        bad.outdir = (fs::temp_directory_path() / "granger_exp_never").string();
        fs::remove_all(bad.outdir);
        CHECK_THROWS_AS(run_experiment(bad), ConfigError);
        CHECK_FALSE(fs::exists(bad.outdir));
    }
    SUBCASE("validation reports every violated field") {
        ExperimentConfig bad = cfg;
        bad.models = {"cGRU"};
        bad.seeds.clear();
        bad.grid.learning_rates.clear();
        try {
            bad.validate();
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            std::string msg = e.what();
            CHECK(msg.find("cGRU") != std::string::npos);
            CHECK(msg.find("seeds") != std::string::npos);
            CHECK(msg.find("learning_rates") != std::string::npos);
        }
    }
}

TEST_CASE("end-to-end var3 run writes consistent artifacts") {
    fs::path outdir = fresh_dir("run");
    ExperimentConfig cfg = tiny_var_config(outdir);
    RunReport report = run_experiment(cfg);
    CHECK(report.exit_code == 0);
    CHECK(report.runs.size() == 4);  // 2 models x 2 seeds

    for (const std::string& model : cfg.models) {
        for (std::uint64_t seed : cfg.seeds) {
            fs::path run_dir = outdir / "var3" / model / std::to_string(seed);
            for (const char* name : {"results.json", "gc_scores.csv", "gc_scaled.csv",
                                     "gc_binary.csv", "history.csv", "truth.csv",
                                     "checkpoints.json"}) {
                CAPTURE(model);
                CAPTURE(name);
                CHECK(fs::exists(run_dir / name));
            }

            // results.json numbers are recomputable from the emitted CSVs
            nlohmann::json results = io::read_json(run_dir / "results.json");
            MetricsConfig metrics;
            nlohmann::json rescored =
                score_files(run_dir / "gc_scores.csv", run_dir / "truth.csv", metrics);
            CHECK(rescored.at("auroc").get<double>() ==
                  results.at("metrics").at("auroc").get<double>());
            CHECK(rescored.at("aupr").get<double>() ==
                  results.at("metrics").at("aupr").get<double>());

            // provenance echoes the generator and optimizer constants
            const nlohmann::json& prov = results.at("provenance");
            CHECK(prov.at("data").at("coeff").get<double>() == cfg.var_sim.coeff);
            CHECK(prov.at("data").at("noise_sd").get<double>() == cfg.var_sim.noise_sd);
            CHECK(prov.at("data").at("var_burn_in").get<std::size_t>() == cfg.var_sim.burn_in);
            CHECK(prov.at("train").at("adam_beta1").get<double>() == cfg.train.adam_beta1);
            CHECK(prov.at("metrics").at("include_diagonal").get<bool>() == true);
        }
    }
    CHECK(fs::exists(outdir / "var3" / "summary.json"));
    nlohmann::json summary = io::read_json(outdir / "var3" / "summary.json");
    CHECK(summary.at("models").contains("VAR"));
    CHECK(summary.at("models").at("VAR").contains("auroc_mean"));
    CHECK(summary.at("models").at("VAR").contains("auroc_sd"));
}

TEST_CASE("two executions produce byte-identical GC artifacts") {
    fs::path out1 = fresh_dir("det1");
    fs::path out2 = fresh_dir("det2");
    ExperimentConfig cfg1 = tiny_var_config(out1);
    cfg1.models = {"cLSTMwF_s"};
    cfg1.seeds = {3};
    cfg1.workers = 2;  // determinism must not depend on scheduling
    ExperimentConfig cfg2 = cfg1;
    cfg2.outdir = out2.string();

    CHECK(run_experiment(cfg1).exit_code == 0);
    CHECK(run_experiment(cfg2).exit_code == 0);

    for (const char* name : {"gc_scores.csv", "gc_scaled.csv", "gc_binary.csv",
                             "lag_scores.csv", "checkpoints.json"}) {
        CAPTURE(name);
        CHECK(slurp(out1 / "var3" / "cLSTMwF_s" / "3" / name) ==
              slurp(out2 / "var3" / "cLSTMwF_s" / "3" / name));
    }

    // results.json matches too, once the wall-time field is set aside
    nlohmann::json r1 = io::read_json(out1 / "var3" / "cLSTMwF_s" / "3" / "results.json");
    nlohmann::json r2 = io::read_json(out2 / "var3" / "cLSTMwF_s" / "3" / "results.json");
    r1.erase("wall_time_s");
    r2.erase("wall_time_s");
    r1.at("provenance").erase("outdir");
    r2.at("provenance").erase("outdir");
    CHECK(r1.dump() == r2.dump());
}

TEST_CASE("simulate writes panel files that round-trip") {
    fs::path outdir = fresh_dir("sim");
    ExperimentConfig cfg;
    cfg.task = "var3";
    cfg.outdir = outdir.string();
    cfg.var_sim.p = 3;
    cfg.var_sim.T = 30;
    write_simulated_panel(cfg, 11);
    CHECK(fs::exists(outdir / "panel.csv"));
    CHECK(fs::exists(outdir / "truth.csv"));
    CHECK(fs::exists(outdir / "truth_lags.csv"));

    TimeSeriesPanel panel = load_panel_csv(outdir / "panel.csv", outdir / "truth.csv");
    CHECK(panel.num_series() == 3);
    CHECK(panel.length() == 30);
    CHECK(panel.series_names == std::vector<std::string>{"x1", "x2", "x3"});
    REQUIRE(panel.truth.has_value());

    TimeSeriesPanel direct = simulate_var([&] {
        VarSimConfig c = cfg.var_sim;
        c.seed = 11;
        return c;
    }());
    CHECK(panel.data.v == direct.data.v);  // CSV doubles survive exactly
}

TEST_CASE("replicated-panel task trains from a fixture") {
    fs::path outdir = fresh_dir("dream");
    fs::path panel_path = outdir / "panel.tsv";
    {
        std::ofstream out(panel_path);
        out << "Time\tG1\tG2\tG3\n";
        RngStream rng(21, "fixture");
        for (int rep = 0; rep < 4; ++rep) {
            for (int t = 0; t < 9; ++t) {
                out << t * 10;
                for (int j = 0; j < 3; ++j) out << '\t' << rng.uniform(0.0, 1.0);
                out << '\n';
            }
            out << '\n';
        }
    }
    fs::path truth_path = outdir / "edges.txt";
    {
        std::ofstream out(truth_path);
        out << "G1 G2 1\nG3 G1 1\n";
    }

    ExperimentConfig cfg;
    cfg.task = "replicated-panel";
    cfg.models = {"cMLP_s"};
    cfg.seeds = {1};
    cfg.outdir = (outdir / "out").string();
    cfg.max_lag = 2;
    cfg.panel_path = panel_path.string();
    cfg.truth_path = truth_path.string();
    cfg.grid.learning_rates = {0.05};
    cfg.grid.lambdas = {1e-4};
    cfg.train.epochs = 3;
    cfg.train.batch_size = 64;
    cfg.metrics.include_diagonal = false;  // edge-list truth has no self-edges
    cfg.workers = 1;

    RunReport report = run_experiment(cfg);
    CHECK(report.exit_code == 0);
    nlohmann::json results =
        io::read_json(fs::path(cfg.outdir) / "replicated-panel" / "cMLP_s" / "1" / "results.json");
    CHECK(results.at("metrics").contains("auroc"));
}

TEST_CASE("sliding-window protocol on a small fixture") {
    fs::path outdir = fresh_dir("sliding");
    fs::path panel_path = outdir / "panel.csv";
    {
        // T = 120, p = 3 with simple cross-lag structure plus noise
        VarSimConfig sim;
        sim.p = 3;
        sim.T = 120;
        sim.causal_lags = {1};
        sim.seed = 31;
        TimeSeriesPanel panel = simulate_var(sim);
        io::write_matrix_csv(panel_path, panel.data, panel.series_names);
    }

    ExperimentConfig cfg;
    cfg.task = "csv-panel";
    cfg.models = {"cMLPwF_s"};
    cfg.seeds = {5};
    cfg.outdir = (outdir / "out").string();
    cfg.max_lag = 3;
    cfg.panel_path = panel_path.string();
    cfg.grid.learning_rates = {0.05};
    cfg.grid.lambdas = {1e-4};
    cfg.train.epochs = 2;
    cfg.train.batch_size = 64;
    cfg.window.length = 40;
    cfg.window.overlap = 0.5;
    cfg.window.sampling_rate_hz = 10.0;
    cfg.window.train_fraction = 0.75;
    cfg.workers = 1;

    RunReport report = run_sliding_window(cfg);
    CHECK(report.exit_code == 0);
    // stride 20: starts 0, 20, 40, 60, 80
    CHECK(report.runs.size() == 5);

    fs::path run_dir = fs::path(cfg.outdir) / "sliding-window" / "cMLPwF_s";
    nlohmann::json summary = io::read_json(run_dir / "summary.json");
    CHECK(summary.at("num_windows").get<std::size_t>() == 5);
    // lagged rows per window: 40 - 3 = 37; chronological 75/25 -> 27 / 10
    for (const auto& w : summary.at("windows")) {
        CHECK(w.at("train_rows").get<std::size_t>() == 27);
        CHECK(w.at("val_rows").get<std::size_t>() == 10);
    }
    CHECK(fs::exists(run_dir / "scores_0s.csv"));
    CHECK(fs::exists(run_dir / "binary_0s.csv"));
    CHECK(fs::exists(run_dir / "scores_8s.csv"));  // start sample 80 at 10 Hz

    // threshold composition: binary == (scaled >= 0.5) entry by entry
    Matrix scores = io::read_csv(run_dir / "scores_0s.csv").data;
    Matrix binary = io::read_csv(run_dir / "binary_0s.csv").data;
    REQUIRE(scores.numel() == binary.numel());
    for (std::size_t i = 0; i < scores.numel(); ++i) {
        CHECK(binary.v[i] == (scores.v[i] >= 0.5 ? 1.0 : 0.0));
    }

    // long-format CSV has one row per (window, cause, effect)
    std::string long_csv = slurp(run_dir / "gc_long.csv");
    std::size_t lines = 0;
    for (char c : long_csv) lines += c == '\n';
    CHECK(lines == 1 + 5 * 9);
}

TEST_CASE("score subcommand backend") {
    fs::path dir = fresh_dir("score");
    io::write_matrix_csv(dir / "scores.csv", Matrix(2, 2, {0.9, 0.1, 0.2, 0.8}));
    io::write_matrix_csv(dir / "truth.csv", Matrix(2, 2, {1, 0, 0, 1}));
    MetricsConfig metrics;
    nlohmann::json j = score_files(dir / "scores.csv", dir / "truth.csv", metrics);
    CHECK(j.at("auroc").get<double>() == 1.0);
    CHECK(j.at("aupr").get<double>() == 1.0);
    CHECK(j.at("entries").get<std::size_t>() == 4);
}

TEST_CASE("grad-check self-test backend (reduced point count)") {
    GradCheckReport report = run_grad_check(3, 99);
    CHECK(report.max_primitive_error < 1e-5);
    CHECK(report.max_model_error < 1e-5);
    CHECK_FALSE(report.lines.empty());
}

#ifdef GRANGER_CLI_PATH
TEST_CASE("command-line interface smoke") {
    const std::string cli = GRANGER_CLI_PATH;
    REQUIRE(fs::exists(cli));
    fs::path dir = fresh_dir("cli");

    SUBCASE("simulate then score") {
        std::string cmd = cli + " simulate --task var3 --p 3 --T 40 --seed 2 --outdir " +
                          (dir / "data").string() + " > /dev/null 2>&1";
        CHECK(std::system(cmd.c_str()) == 0);
        CHECK(fs::exists(dir / "data" / "panel.csv"));
        CHECK(fs::exists(dir / "data" / "truth.csv"));

        std::string score_cmd = cli + " score --scores " + (dir / "data" / "truth.csv").string() +
                                " --truth " + (dir / "data" / "truth.csv").string() + " > " +
                                (dir / "score.json").string() + " 2>/dev/null";
        CHECK(std::system(score_cmd.c_str()) == 0);
        nlohmann::json j = io::read_json(dir / "score.json");
        CHECK(j.at("auroc").get<double>() == 1.0);  // truth scored against itself
    }
    SUBCASE("run with a config file and a validation failure") {
        ExperimentConfig cfg = tiny_var_config(dir / "out");
        cfg.models = {"VAR"};
        cfg.seeds = {1};
        io::write_json_atomic(dir / "config.json", cfg.to_json());
        std::string cmd = cli + " run --config " + (dir / "config.json").string() +
                          " > /dev/null 2>&1";
        CHECK(std::system(cmd.c_str()) == 0);
        CHECK(fs::exists(dir / "out" / "var3" / "VAR" / "1" / "results.json"));

        nlohmann::json bad = cfg.to_json();
        bad["models"] = {"cGRU"};
        io::write_json_atomic(dir / "bad.json", bad);
        std::string bad_cmd = cli + " run --config " + (dir / "bad.json").string() +
                              " --outdir " + (dir / "never").string() + " > /dev/null 2>&1";
        CHECK(std::system(bad_cmd.c_str()) != 0);
        CHECK_FALSE(fs::exists(dir / "never"));
    }
    SUBCASE("grad-check subcommand") {
        std::string cmd = cli + " grad-check --points 2 > /dev/null 2>&1";
        CHECK(std::system(cmd.c_str()) == 0);
    }
}
#endif
