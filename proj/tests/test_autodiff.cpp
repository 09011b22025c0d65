#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "granger/errors.hpp"
#include "granger/grad_check.hpp"
#include "granger/rng.hpp"
#include "granger/tape.hpp"

#include <cmath>
#include <cstring>

using granger::DimensionError;
using granger::NumericError;
using granger::RngStream;
using granger::UsageError;
using granger::ad::Tape;
using granger::ad::Tensor;
using granger::ad::Var;

TEST_CASE("primitive forward values") {
    Tape tape;

    Var s = tape.sigmoid(tape.constant(Tensor::vec({0.0})));
    CHECK(tape.value(s).values[0] == doctest::Approx(0.5).epsilon(1e-15));

    Var t = tape.tanh(tape.constant(Tensor::vec({0.0})));
    CHECK(tape.value(t).values[0] == 0.0);

    Var m = tape.matmul(tape.constant(Tensor::identity(2)),
                        tape.constant(Tensor::matrix(2, 1, {3.0, 4.0})));
    CHECK(tape.value(m).values == std::vector<double>{3.0, 4.0});

    Var n = tape.group_norm(tape.constant(Tensor::vec({3.0, 4.0})));
    CHECK(tape.scalar_value(n) == 5.0);

    Var e = tape.mse(tape.constant(Tensor::vec({1.0, 2.0})),
                     tape.constant(Tensor::vec({0.0, 0.0})));
    CHECK(tape.scalar_value(e) == doctest::Approx(2.5));
}

TEST_CASE("shape errors name the primitive") {
    Tape tape;
    Var a = tape.constant(Tensor::matrix(2, 3, std::vector<double>(6, 1.0)));
    Var b = tape.constant(Tensor::matrix(2, 2, std::vector<double>(4, 1.0)));
    CHECK_THROWS_AS(tape.matmul(a, b), DimensionError);
    CHECK_THROWS_WITH_AS(tape.add(a, b),
                         doctest::Contains("add"), DimensionError);
    CHECK_THROWS_AS(tape.mse(a, b), DimensionError);
    CHECK_THROWS_AS(tape.slice(a, 4, 3), DimensionError);
    CHECK_THROWS_AS(tape.slice_cols(a, 2, 2), DimensionError);
    CHECK_THROWS_AS(tape.reshape(a, {4, 2}), DimensionError);
}

TEST_CASE("non-finite outputs raise numeric errors") {
    Tape tape;
    Var a = tape.constant(Tensor::vec({1.0}));
    Var zero = tape.constant(Tensor::vec({0.0}));
    CHECK_THROWS_AS(tape.div(a, zero), NumericError);
    Var big = tape.constant(Tensor::vec({1e308}));
    CHECK_THROWS_AS(tape.mul(big, big), NumericError);
}

TEST_CASE("backward analytic examples") {
    SUBCASE("sum of squares via matmul") {
        Tensor w = Tensor::vec({1.0, 2.0});
        w.requires_grad = true;
        Tape tape;
        Var v = tape.leaf(w);
        Var f = tape.matmul(tape.reshape(v, {1, 2}), tape.reshape(v, {2, 1}));
        tape.backward(tape.reshape(f, {1}));
        CHECK((*w.grad)[0] == doctest::Approx(2.0).epsilon(1e-14));
        CHECK((*w.grad)[1] == doctest::Approx(4.0).epsilon(1e-14));
    }
    SUBCASE("sigmoid slope at zero") {
        Tensor w = Tensor::vec({0.0});
        w.requires_grad = true;
        Tape tape;
        Var f = tape.sigmoid(tape.leaf(w));
        tape.backward(f);
        CHECK((*w.grad)[0] == doctest::Approx(0.25).epsilon(1e-15));
    }
    SUBCASE("norm gradient is the unit vector") {
        Tensor w = Tensor::vec({3.0, 4.0});
        w.requires_grad = true;
        Tape tape;
        Var f = tape.group_norm(tape.leaf(w));
        tape.backward(f);
        CHECK((*w.grad)[0] == doctest::Approx(0.6).epsilon(1e-15));
        CHECK((*w.grad)[1] == doctest::Approx(0.8).epsilon(1e-15));
    }
    SUBCASE("norm subgradient at the origin is zero") {
        Tensor w = Tensor::vec({0.0, 0.0});
        w.requires_grad = true;
        Tape tape;
        Var f = tape.group_norm(tape.leaf(w));
        tape.backward(f);
        CHECK((*w.grad)[0] == 0.0);
        CHECK((*w.grad)[1] == 0.0);
    }
}

TEST_CASE("fan-out gradients add over consuming paths") {
    Tensor x = Tensor::vec({1.5});
    x.requires_grad = true;
    Tape tape;
    Var v = tape.leaf(x);
    // f = x*x + 3x: fan-out of the same leaf into two paths
    Var f = tape.add(tape.mul(v, v), tape.scalar_mul(v, 3.0));
    tape.backward(f);
    CHECK((*x.grad)[0] == doctest::Approx(2.0 * 1.5 + 3.0).epsilon(1e-14));
}

TEST_CASE("leaf registration dedups by tensor identity") {
    Tensor x = Tensor::vec({1.0});
    Tape tape;
    CHECK(tape.leaf(x).id == tape.leaf(x).id);
}

TEST_CASE("backward leaves forward values unchanged") {
    Tensor w = Tensor::vec({0.3, -1.2, 0.8});
    w.requires_grad = true;
    Tape tape;
    Var v = tape.leaf(w);
    Var h = tape.sigmoid(v);
    Var f = tape.group_norm(h);
    const std::vector<double> w_before = w.values;
    const std::vector<double> h_before = tape.value(h).values;
    tape.backward(f);
    CHECK(w.values == w_before);
    CHECK(tape.value(h).values == h_before);
}

TEST_CASE("backward usage errors") {
    Tape tape;
    CHECK_THROWS_AS(tape.backward(Var{0}), UsageError);
    Var m = tape.constant(Tensor::matrix(2, 2, {1, 2, 3, 4}));
    CHECK_THROWS_AS(tape.backward(m), UsageError);
}

TEST_CASE("grad accumulates additively across backward calls") {
    Tensor w = Tensor::vec({2.0});
    w.requires_grad = true;
    for (int rep = 0; rep < 2; ++rep) {
        Tape tape;
        Var f = tape.scalar_mul(tape.leaf(w), 3.0);
        tape.backward(tape.reshape(f, {1}));
    }
    CHECK((*w.grad)[0] == 6.0);  // 3 + 3
}

TEST_CASE("concat, slice and reshape round values correctly") {
    Tape tape;
    Var a = tape.constant(Tensor::vec({1, 2, 3}));
    Var b = tape.constant(Tensor::vec({4, 5}));
    std::vector<Var> parts{a, b};
    Var c = tape.concat(parts);
    CHECK(tape.value(c).values == std::vector<double>{1, 2, 3, 4, 5});
    CHECK(tape.value(tape.slice(c, 1, 3)).values == std::vector<double>{2, 3, 4});
    Var m = tape.constant(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
    CHECK(tape.value(tape.slice_cols(m, 1, 2)).values == std::vector<double>{2, 3, 5, 6});
    CHECK(tape.value(tape.reshape(m, {3, 2})).shape == std::vector<std::size_t>{3, 2});
}

TEST_CASE("grad_check: quadratic is exact to first order") {
    Tensor point = Tensor::vec({1.0, 2.0});
    double err = granger::ad::grad_check(
        [](Tape& t, Var v) {
            return t.reshape(t.matmul(t.reshape(v, {1, 2}), t.reshape(v, {2, 1})), {1});
        },
        point, 1e-5);
    CHECK(err < 1e-8);
}

TEST_CASE("grad_check: two-layer sigmoid network") {
    RngStream rng(42, "mlp-check");
    Tensor point = Tensor::vec(std::vector<double>(6, 0.0));
    for (double& v : point.values) v = rng.uniform(-1.0, 1.0);
    Tensor w1 = Tensor::zeros({6, 4});
    for (double& v : w1.values) v = rng.uniform(-1.0, 1.0);
    Tensor w2 = Tensor::zeros({4, 1});
    for (double& v : w2.values) v = rng.uniform(-1.0, 1.0);

    double err = granger::ad::grad_check(
        [&](Tape& t, Var v) {
            Var h = t.sigmoid(t.matmul(t.reshape(v, {1, 6}), t.constant(w1)));
            Var out = t.sigmoid(t.matmul(h, t.constant(w2)));
            return t.reshape(out, {1});
        },
        point, 1e-5);
    CHECK(err < 1e-5);
}

TEST_CASE("grad_check flags non-finite probes") {
    Tensor point = Tensor::vec({0.0});
    CHECK_THROWS_AS(granger::ad::grad_check(
                        [](Tape& t, Var v) {
                            return t.div(t.constant(Tensor::scalar(1.0)), v);
                        },
                        point, 1e-5),
                    NumericError);
}

TEST_CASE("broadcast rules: row and scalar second operands") {
    Tape tape;
    Var m = tape.constant(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
    Var row = tape.constant(Tensor::matrix(1, 3, {10, 20, 30}));
    CHECK(tape.value(tape.add(m, row)).values == std::vector<double>{11, 22, 33, 14, 25, 36});
    Var s = tape.constant(Tensor::scalar(2.0));
    CHECK(tape.value(tape.mul(m, s)).values == std::vector<double>{2, 4, 6, 8, 10, 12});
    CHECK(tape.value(tape.div(m, s)).values == std::vector<double>{0.5, 1, 1.5, 2, 2.5, 3});

    // gradient of the broadcast operand sums over the broadcast rows
    Tensor bias = Tensor::matrix(1, 3, {0.0, 0.0, 0.0});
    bias.requires_grad = true;
    Tape tape2;
    Var sum = tape2.mse(tape2.add(tape2.constant(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6})),
                                  tape2.leaf(bias)),
                        tape2.constant(Tensor::matrix(2, 3, std::vector<double>(6, 0.0))));
    tape2.backward(sum);
    CHECK((*bias.grad)[0] == doctest::Approx(2.0 / 6.0 * (1 + 4)).epsilon(1e-12));
    CHECK((*bias.grad)[2] == doctest::Approx(2.0 / 6.0 * (3 + 6)).epsilon(1e-12));
}
