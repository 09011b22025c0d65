#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "granger/datagen.hpp"
#include "granger/errors.hpp"
#include "granger/models.hpp"
#include "granger/training.hpp"

#include <cmath>
#include <cstring>

using namespace granger;

namespace {

LaggedDataset ar1_dataset(double coeff, double noise_sd, std::size_t T, std::uint64_t seed) {
    std::vector<Matrix> a{Matrix(1, 1, {coeff})};
    Matrix history(1, 1, {0.0});
    RngStream noise(seed, "noise");
    TimeSeriesPanel panel;
    panel.series_names = {"x1"};
    panel.data = simulate_var_process(a, history, T, noise_sd, 100, noise);
    panel.replicate_lengths = {T};
    return make_lagged(panel, 1);
}

bool params_equal(Model& a, Model& b) {
    auto pa = a.parameter_tensors();
    auto pb = b.parameter_tensors();
    if (pa.size() != pb.size()) return false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        if (pa[i]->values.size() != pb[i]->values.size()) return false;
        if (std::memcmp(pa[i]->values.data(), pb[i]->values.data(),
                        pa[i]->values.size() * sizeof(double)) != 0) {
            return false;
        }
    }
    return true;
}

} // namespace

TEST_CASE("adam_step hand-computed update") {
    std::vector<double> p{0.0}, g{1.0}, m{0.0}, v{0.0};
    adam_step(p, g, m, v, 0.1, 0.9, 0.999, 0.0, 1);
    CHECK(p[0] == doctest::Approx(-0.1).epsilon(1e-15));

    // zero gradient with zero state leaves the parameter unchanged
    std::vector<double> p2{1.5}, g2{0.0}, m2{0.0}, v2{0.0};
    adam_step(p2, g2, m2, v2, 0.1, 0.9, 0.999, 1e-8, 1);
    CHECK(p2[0] == 1.5);

    CHECK_THROWS_AS(adam_step(p, g, m, v, 0.1, 0.9, 0.999, 0.0, 0), UsageError);
}

TEST_CASE("training is bitwise deterministic under a fixed seed") {
    LaggedDataset data = ar1_dataset(0.5, 0.1, 120, 3);
    SplitIndices split = train_val_split(data.size(), 0.2, 3);
    TrainConfig cfg;
    cfg.epochs = 12;
    cfg.batch_size = 32;
    cfg.learning_rate = 0.05;
    cfg.lambda = 1e-4;
    cfg.seed = 3;
    PenaltyConfig penalty;

    RngStream i1(3, "init/VAR/joint");
    auto m1 = make_model(ModelConfig::make(ModelKind::var, 1, 1), i1);
    TrainResult r1 = train(*m1, data, split, penalty, cfg);

    RngStream i2(3, "init/VAR/joint");
    auto m2 = make_model(ModelConfig::make(ModelKind::var, 1, 1), i2);
    TrainResult r2 = train(*m2, data, split, penalty, cfg);

    CHECK(params_equal(*m1, *m2));
    CHECK(r1.best_val_mse == r2.best_val_mse);
    REQUIRE(r1.history.epochs.size() == r2.history.epochs.size());
    for (std::size_t e = 0; e < r1.history.epochs.size(); ++e) {
        CHECK(r1.history.epochs[e].data_loss == r2.history.epochs[e].data_loss);
        CHECK(r1.history.epochs[e].val_mse == r2.history.epochs[e].val_mse);
    }
}

TEST_CASE("zero epochs leaves the model unchanged with empty history") {
    LaggedDataset data = ar1_dataset(0.5, 0.1, 60, 5);
    SplitIndices split = train_val_split(data.size(), 0.2, 5);
    RngStream init(5, "init/VAR/joint");
    auto model = make_model(ModelConfig::make(ModelKind::var, 1, 1), init);
    auto before = model->snapshot_values();
    TrainConfig cfg;
    cfg.epochs = 0;
    TrainResult result = train(*model, data, split, PenaltyConfig{}, cfg);
    CHECK(result.history.epochs.empty());
    CHECK(model->snapshot_values() == before);
    CHECK(result.best_epoch == 0);
}

TEST_CASE("lambda = 0 VAR training matches the least-squares oracle") {
    const double true_coeff = 0.5;
    LaggedDataset data = ar1_dataset(true_coeff, 0.1, 400, 7);
    SplitIndices split = train_val_split(data.size(), 0.2, 7);

    // closed-form least squares with intercept over the training rows
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const double n = static_cast<double>(split.train.size());
    for (std::size_t r : split.train) {
        const double x = data.inputs.at(r, 0), y = data.targets.at(r, 0);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double ls_coeff = (n * sxy - sx * sy) / (n * sxx - sx * sx);

    RngStream init(7, "init/VAR/joint");
    auto model = make_model(ModelConfig::make(ModelKind::var, 1, 1), init);
    TrainConfig cfg;
    cfg.epochs = 500;
    cfg.learning_rate = 0.02;
    cfg.lambda = 0.0;
    cfg.seed = 7;
    TrainResult result = train(*model, data, split, PenaltyConfig{}, cfg);
    CHECK_FALSE(result.diverged);

    auto& var = static_cast<VarModel&>(*model);
    CHECK(std::abs(var.coefficient(1, 0, 0) - ls_coeff) < 1e-2);
}

TEST_CASE("large lambda drives the decoupling factors to zero") {
    VarSimConfig sim;
    sim.p = 3;
    sim.T = 80;
    sim.seed = 9;
    LaggedDataset data = make_lagged(simulate_var(sim), 2);
    SplitIndices split = train_val_split(data.size(), 0.2, 9);

    ModelConfig cfg = ModelConfig::make(ModelKind::cmlp_wf, 3, 2, true, 0);
    RngStream init(9, "init/cMLPwF/t0");
    auto model = make_model(cfg, init);
    TrainConfig tc;
    tc.epochs = 1200;
    tc.learning_rate = 0.001;
    tc.lambda = 100.0;
    tc.seed = 9;
    PenaltyConfig penalty;
    penalty.kind = PenaltyKind::decoupled_l1;
    train(*model, data, split, penalty, tc);

    auto& mlp = static_cast<ComponentMlp&>(*model);
    for (double v : mlp.factors_v().values) CHECK(std::abs(v) < 1e-3);
    for (double q : mlp.factors_q().values) CHECK(std::abs(q) < 1e-3);
}

TEST_CASE("full-batch gradient step decreases the loss by lr * |g|^2") {
    LaggedDataset data = ar1_dataset(0.5, 0.1, 100, 11);
    std::vector<std::size_t> all(data.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

    RngStream init(11, "init/VAR/joint");
    auto model = make_model(ModelConfig::make(ModelKind::var, 1, 1), init);
    PenaltyConfig penalty;  // lambda 0
    BatchEval ev = eval_loss_and_grads(*model, data, all, penalty);

    double grad_norm_sq = 0.0;
    for (ad::Tensor* t : model->parameter_tensors()) {
        for (double g : *t->grad) grad_norm_sq += g * g;
    }
    REQUIRE(grad_norm_sq > 0.0);

    const double lr = 1e-6;
    for (ad::Tensor* t : model->parameter_tensors()) {
        for (std::size_t i = 0; i < t->values.size(); ++i) t->values[i] -= lr * (*t->grad)[i];
    }
    BatchEval after = eval_loss_and_grads(*model, data, all, penalty);
    const double drop = ev.data_term - after.data_term;
    CHECK(drop == doctest::Approx(lr * grad_norm_sq).epsilon(0.05));
}

TEST_CASE("validation MSE never includes the penalty term") {
    LaggedDataset data = ar1_dataset(0.5, 0.1, 120, 13);
    SplitIndices split = train_val_split(data.size(), 0.2, 13);
    RngStream init(13, "init/VAR/joint");
    auto model = make_model(ModelConfig::make(ModelKind::var, 1, 1), init);
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.learning_rate = 0.05;
    cfg.lambda = 0.5;  // large enough that including it would be visible
    cfg.seed = 13;
    TrainResult result = train(*model, data, split, PenaltyConfig{}, cfg);

    result.restore_best(*model);
    const double recomputed = validation_mse(*model, data, split.val);
    CHECK(recomputed == result.best_val_mse);

    PenaltyConfig active;
    active.lambda = 0.5;
    std::vector<std::size_t> val = split.val;
    BatchEval with_penalty = eval_loss_and_grads(*model, data, val, active);
    CHECK(with_penalty.penalty_term > 0.0);
    CHECK(result.best_val_mse < with_penalty.data_term + with_penalty.penalty_term);
}

TEST_CASE("wF and plain variants agree on linear data at lambda = 0") {
    VarSimConfig sim;
    sim.p = 2;
    sim.T = 300;
    sim.causal_lags = {1};
    sim.coeff = 0.4;
    sim.noise_sd = 0.1;
    sim.seed = 15;
    LaggedDataset data = make_lagged(simulate_var(sim), 1);
    SplitIndices split = train_val_split(data.size(), 0.2, 15);

    TrainConfig tc;
    tc.epochs = 250;
    tc.learning_rate = 0.05;
    tc.lambda = 0.0;
    tc.seed = 15;

    auto run = [&](ModelKind kind) {
        ModelConfig cfg = ModelConfig::make(kind, 2, 1, true, 0);
        RngStream init(15, "init/" + to_string(kind) + "/t0");
        auto model = make_model(cfg, init);
        PenaltyConfig penalty;
        penalty.kind = default_penalty_kind(kind);
        TrainResult r = train(*model, data, split, penalty, tc);
        return r.best_val_mse;
    };
    const double plain = run(ModelKind::cmlp);
    const double decoupled = run(ModelKind::cmlp_wf);
    // both contain the linear model; they should land near the noise floor
    CHECK(plain < 0.03);
    CHECK(decoupled < 0.03);
    CHECK(std::abs(plain - decoupled) < 0.5 * std::max(plain, decoupled));
}

TEST_CASE("LeKVAR kernel output layer is unit-norm after every step") {
    VarSimConfig sim;
    sim.p = 3;
    sim.T = 80;
    sim.seed = 21;
    LaggedDataset data = make_lagged(simulate_var(sim), 2);
    SplitIndices split = train_val_split(data.size(), 0.2, 21);

    RngStream init(21, "init/LeKVAR/joint");
    auto model = make_model(ModelConfig::make(ModelKind::lekvar, 3, 2), init);
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.learning_rate = 0.05;
    cfg.lambda = 1e-4;
    cfg.seed = 21;
    train(*model, data, split, PenaltyConfig{}, cfg);

    double norm = 0.0;
    for (auto& [name, t] : model->named_parameters()) {
        if (name == "kernel.w2") {
            for (double v : t->values) norm += v * v;
        }
    }
    CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("model/penalty compatibility is enforced") {
    ModelConfig lstm = ModelConfig::make(ModelKind::clstm, 3, 2, false, 0);
    PenaltyConfig hier;
    hier.kind = PenaltyKind::hierarchical_group_lasso;
    CHECK_THROWS_AS(check_model_penalty(lstm, hier), ConfigError);

    ModelConfig wf = ModelConfig::make(ModelKind::cmlp_wf, 3, 2, false, 0);
    PenaltyConfig gl;
    CHECK_THROWS_AS(check_model_penalty(wf, gl), ConfigError);

    ModelConfig plain = ModelConfig::make(ModelKind::cmlp, 3, 2, false, 0);
    PenaltyConfig dec;
    dec.kind = PenaltyKind::decoupled_l1;
    CHECK_THROWS_AS(check_model_penalty(plain, dec), ConfigError);

    CHECK_NOTHROW(check_model_penalty(lstm, gl));
    CHECK_NOTHROW(check_model_penalty(wf, dec));
}

TEST_CASE("grid search selection and tie-breaking") {
    LaggedDataset data = ar1_dataset(0.5, 0.1, 100, 17);
    SplitIndices split = train_val_split(data.size(), 0.2, 17);
    TrainConfig tc;
    tc.seed = 17;

    SUBCASE("singleton grids reproduce a direct train call") {
        tc.epochs = 10;
        std::vector<double> lrs{0.05}, lambdas{1e-4};
        GridSearchResult gs = grid_search(ModelConfig::make(ModelKind::var, 1, 1), data, split,
                                          lrs, lambdas, PenaltyConfig{}, tc, 1);

        RngStream init(17, "init/VAR/joint");
        auto direct = make_model(ModelConfig::make(ModelKind::var, 1, 1), init);
        TrainConfig dc = tc;
        dc.learning_rate = 0.05;
        dc.lambda = 1e-4;
        TrainResult dr = train(*direct, data, split, PenaltyConfig{}, dc);
        dr.restore_best(*direct);
        CHECK(params_equal(*gs.models.front(), *direct));
        CHECK(gs.winners.front().val_mse == dr.best_val_mse);
    }
    SUBCASE("exact ties prefer lower lambda, then lower learning rate") {
        tc.epochs = 0;  // every point keeps its (identical) initial parameters
        std::vector<double> lrs{0.1, 0.01}, lambdas{1e-3, 1e-5};
        GridSearchResult gs = grid_search(ModelConfig::make(ModelKind::var, 1, 1), data, split,
                                          lrs, lambdas, PenaltyConfig{}, tc, 1);
        CHECK(gs.points.size() == 4);
        CHECK(gs.winners.front().lambda == 1e-5);
        CHECK(gs.winners.front().learning_rate == 0.01);
    }
    SUBCASE("a diverging point is flagged and skipped") {
        tc.epochs = 8;
        std::vector<double> lrs{1e150, 0.05}, lambdas{1e-4};
        GridSearchResult gs = grid_search(ModelConfig::make(ModelKind::var, 1, 1), data, split,
                                          lrs, lambdas, PenaltyConfig{}, tc, 1);
        bool saw_diverged = false;
        for (const auto& point : gs.points) {
            if (point.learning_rate == 1e150) {
                CHECK(point.diverged);
                saw_diverged = true;
            }
        }
        CHECK(saw_diverged);
        CHECK(gs.winners.front().learning_rate == 0.05);
        CHECK_FALSE(gs.winners.front().diverged);
    }
    SUBCASE("all points diverging raises an aggregate error") {
        tc.epochs = 8;
        std::vector<double> lrs{1e150}, lambdas{1e-4};
        CHECK_THROWS_AS(grid_search(ModelConfig::make(ModelKind::var, 1, 1), data, split, lrs,
                                    lambdas, PenaltyConfig{}, tc, 1),
                        NumericError);
    }
    SUBCASE("component-wise kinds select per target and run in parallel") {
        VarSimConfig sim;
        sim.p = 3;
        sim.T = 80;
        sim.seed = 19;
        LaggedDataset panel_data = make_lagged(simulate_var(sim), 2);
        SplitIndices panel_split = train_val_split(panel_data.size(), 0.2, 19);
        TrainConfig ptc;
        ptc.seed = 19;
        ptc.epochs = 6;
        std::vector<double> lrs{0.05, 0.01}, lambdas{1e-4};
        ModelConfig base = ModelConfig::make(ModelKind::cmlp, 3, 2, true);

        PenaltyConfig penalty;
        GridSearchResult serial =
            grid_search(base, panel_data, panel_split, lrs, lambdas, penalty, ptc, 1);
        GridSearchResult parallel =
            grid_search(base, panel_data, panel_split, lrs, lambdas, penalty, ptc, 2);
        REQUIRE(serial.models.size() == 3);
        REQUIRE(parallel.models.size() == 3);
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(*serial.models[i]->config().target_index == i);
            CHECK(params_equal(*serial.models[i], *parallel.models[i]));
            CHECK(serial.winners[i].val_mse == parallel.winners[i].val_mse);
        }
        CHECK(serial.points.size() == 6);
    }
}
