#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "granger/errors.hpp"
#include "granger/evaluation.hpp"
#include "granger/models.hpp"
#include "granger/rng.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace granger;

TEST_CASE("auroc hand values") {
    std::vector<double> s{0.9, 0.8, 0.1};
    std::vector<std::uint8_t> l{1, 0, 1};
    CHECK(auroc(s, l) == 0.5);

    std::vector<double> perfect{0.9, 0.8, 0.2, 0.1};
    std::vector<std::uint8_t> pl{1, 1, 0, 0};
    CHECK(auroc(perfect, pl) == 1.0);

    std::vector<double> equal{0.5, 0.5, 0.5, 0.5};
    CHECK(auroc(equal, pl) == 0.5);

    std::vector<std::uint8_t> single{1, 1, 1, 1};
    CHECK_THROWS_AS(auroc(perfect, single), MetricError);
}

TEST_CASE("aupr hand values") {
    std::vector<double> s{0.9, 0.8, 0.1};
    std::vector<std::uint8_t> l{1, 0, 1};
    CHECK(aupr(s, l) == doctest::Approx(5.0 / 6.0).epsilon(1e-15));

    std::vector<double> perfect{0.9, 0.8, 0.2, 0.1};
    std::vector<std::uint8_t> pl{1, 1, 0, 0};
    CHECK(aupr(perfect, pl) == 1.0);

    std::vector<double> last{0.9, 0.8, 0.7, 0.1};
    std::vector<std::uint8_t> ll{0, 0, 0, 1};
    CHECK(aupr(last, ll) == 0.25);

    std::vector<std::uint8_t> none{0, 0, 0, 0};
    CHECK_THROWS_AS(aupr(perfect, none), MetricError);
}

TEST_CASE("ranking metrics match brute-force oracles exactly") {
    RngStream rng(123, "metric-oracle");
    const double levels[5] = {0.0, 0.25, 0.5, 0.75, 1.0};
    std::size_t checked = 0;
    while (checked < 1000) {
        const std::size_t n = 2 + rng.uniform_below(11);  // up to 12
        std::vector<double> scores(n);
        std::vector<std::uint8_t> labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = levels[rng.uniform_below(5)];  // coarse grid forces ties
            labels[i] = rng.uniform_below(2) ? 1 : 0;
        }
        std::size_t pos = 0;
        for (auto b : labels) pos += b;
        if (pos == 0 || pos == n) continue;
        ++checked;
        CHECK(auroc(scores, labels) == oracle::auroc_pairwise(scores, labels));
        CHECK(aupr(scores, labels) == oracle::aupr_threshold_scan(scores, labels));
    }
}

TEST_CASE("auroc is invariant under strictly increasing transforms") {
    RngStream rng(5, "monotone");
    for (int rep = 0; rep < 50; ++rep) {
        std::size_t n = 4 + rng.uniform_below(8);
        std::vector<double> scores(n);
        std::vector<std::uint8_t> labels(n);
        bool has0 = false, has1 = false;
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = rng.uniform(-3.0, 3.0);
            labels[i] = rng.uniform_below(2) ? 1 : 0;
            (labels[i] ? has1 : has0) = true;
        }
        if (!has0 || !has1) continue;
        std::vector<double> transformed(n);
        for (std::size_t i = 0; i < n; ++i) transformed[i] = std::exp(2.0 * scores[i]) + 1.0;
        CHECK(auroc(scores, labels) == auroc(transformed, labels));
    }
}

TEST_CASE("min-max scaling") {
    CHECK(min_max_scale_row(std::vector<double>{2, 4, 6}) == std::vector<double>{0.0, 0.5, 1.0});
    CHECK(min_max_scale_row(std::vector<double>{5, 5}) == std::vector<double>{0.0, 0.0});
    CHECK(min_max_scale_row(std::vector<double>{0, 1}) == std::vector<double>{0.0, 1.0});

    Matrix scores(2, 3, {2, 4, 6, 1, 1, 1});
    Matrix scaled = min_max_scale(scores);
    CHECK(scaled.at(0, 2) == 1.0);
    CHECK(scaled.at(1, 0) == 0.0);
    CHECK(scaled.at(1, 2) == 0.0);
}

TEST_CASE("thresholding composes with scaling") {
    GCEstimate estimate;
    estimate.model_kind = "VAR";
    estimate.series_scores = Matrix(1, 3, {2, 4, 6});
    GCEstimate out = threshold_gc(estimate, 0.5);
    REQUIRE(out.binary.has_value());
    CHECK(out.binary->v == std::vector<double>{0, 1, 1});

    GCEstimate zeros = threshold_gc(estimate, 0.0);
    CHECK(zeros.binary->v == std::vector<double>{1, 1, 1});

    CHECK_THROWS_AS(threshold_gc(estimate, 1.5), UsageError);
}

TEST_CASE("lag recovery rule") {
    std::vector<double> good{0.01, 0.02, 0.9, 0.8, 0.7};
    CHECK(lag_recovery(good, {3, 4, 5}));
    std::vector<double> bad{0.9, 0.8, 0.7, 0.01, 0.02};
    CHECK_FALSE(lag_recovery(bad, {3, 4, 5}));
    std::vector<double> uniform{0.5, 0.5, 0.5, 0.5, 0.5};
    CHECK_FALSE(lag_recovery(uniform, {3, 4, 5}));
    CHECK_THROWS_AS(lag_recovery(good, {}), UsageError);
    CHECK_THROWS_AS(lag_recovery(good, {9}), UsageError);
}

TEST_CASE("extract_gc readouts") {
    SUBCASE("VAR zero column scores zero") {
        RngStream rng(1, "init");
        VarModel model(ModelConfig::make(ModelKind::var, 3, 2), rng);
        for (std::size_t k = 1; k <= 2; ++k) {
            for (std::size_t i = 0; i < 3; ++i) model.set_coefficient(k, i, 1, 0.0);
        }
        GCEstimate estimate = extract_gc(model);
        for (std::size_t i = 0; i < 3; ++i) CHECK(estimate.series_scores.at(i, 1) == 0.0);
        REQUIRE(estimate.lag_scores.has_value());
        CHECK(estimate.lag_scores->cols == 2);
    }
    SUBCASE("cMLP group norm is the 3-4-5 triple") {
        RngStream rng(2, "init");
        ModelConfig cfg = ModelConfig::make(ModelKind::cmlp, 2, 1, false, 0);
        cfg.hidden_layers = {2};
        ComponentMlp model(cfg, rng);
        model.first_layer().values = {3.0, 4.0, 0.0, 0.0};  // rows: series 0 = [3,4]
        Matrix row = model.gc_series_scores();
        CHECK(row.at(0, 0) == 5.0);
        CHECK(row.at(0, 1) == 0.0);
    }
    SUBCASE("wF readout is |v| and |q|, and v_j = 0 silences series j") {
        std::vector<std::unique_ptr<Model>> models;
        for (std::size_t target = 0; target < 2; ++target) {
            RngStream rng(3, "init/t" + std::to_string(target));
            models.push_back(make_model(ModelConfig::make(ModelKind::cmlp_wf, 2, 2, true, target), rng));
        }
        auto& m0 = static_cast<ComponentMlp&>(*models[0]);
        m0.factors_v().values = {0.0, 0.7};
        m0.factors_q().values = {0.3, -0.4};

        GCEstimate estimate = extract_gc(models);
        CHECK(estimate.series_scores.at(0, 0) == 0.0);
        CHECK(estimate.series_scores.at(0, 1) == 0.7);
        REQUIRE(estimate.lag_scores.has_value());
        CHECK(estimate.lag_scores->at(0, 0) == 0.3);
        CHECK(estimate.lag_scores->at(0, 1) == 0.4);

        // Definition-1 consistency: score 0 and prediction invariance
        Matrix a(2, 2, {0.5, -0.2, 0.1, 0.9});
        Matrix b = a;
        b.at(0, 0) = 42.0;
        b.at(1, 0) = -17.0;
        CHECK(models[0]->predict(a) == models[0]->predict(b));
    }
    SUBCASE("plain cLSTM has no lag scores") {
        std::vector<std::unique_ptr<Model>> models;
        for (std::size_t target = 0; target < 2; ++target) {
            RngStream rng(4, "init/t" + std::to_string(target));
            models.push_back(make_model(ModelConfig::make(ModelKind::clstm, 2, 2, true, target), rng));
        }
        GCEstimate estimate = extract_gc(models);
        CHECK_FALSE(estimate.lag_scores.has_value());
    }
}

TEST_CASE("flatten_scores honors the diagonal convention") {
    Matrix scores(2, 2, {0.9, 0.2, 0.3, 0.8});
    Matrix truth(2, 2, {1, 0, 0, 1});
    MetricFlags with;
    FlatScores a = flatten_scores(scores, truth, with);
    CHECK(a.scores.size() == 4);
    MetricFlags without;
    without.include_diagonal = false;
    FlatScores b = flatten_scores(scores, truth, without);
    CHECK(b.scores.size() == 2);
    CHECK(b.labels == std::vector<std::uint8_t>{0, 0});
}
