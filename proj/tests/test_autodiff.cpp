#include <doctest.h>

#include <cmath>

#include "gmil/errors.hpp"
#include "gmil/autodiff.hpp"
#include "test_util.hpp"

using namespace gmil;
using autodiff::Act;
using autodiff::Param;
using autodiff::Tape;

TEST_CASE("softmax rows closed forms") {
    Tape tape;
    Matrix m = Matrix::from_rows({{0.0, 0.0}});
    const Matrix& y = tape.value(tape.softmax_rows(tape.constant(m)));
    CHECK(y(0, 0) == doctest::Approx(0.5).epsilon(1e-12));

    Matrix m2 = Matrix::from_rows({{std::log(2.0), 0.0}});
    const Matrix& y2 = tape.value(tape.softmax_rows(tape.constant(m2)));
    CHECK(y2(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(y2(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    Matrix one(1, 1);
    one(0, 0) = 42.0;
    CHECK(tape.value(tape.softmax_rows(tape.constant(one)))(0, 0) == 1.0);
}

TEST_CASE("softmax rows sum to 1 and are shift invariant") {
    Rng rng(3);
    for (int t = 0; t < 50; ++t) {
        Matrix m = testutil::random_matrix(1 + rng.uniform_index(5),
                                           1 + rng.uniform_index(6), rng, 3.0);
        Tape tape;
        Matrix y = tape.value(tape.softmax_rows(tape.constant(m)));
        Matrix shifted = m;
        for (std::size_t i = 0; i < m.rows(); ++i)
            for (std::size_t j = 0; j < m.cols(); ++j) shifted(i, j) += 7.25;
        Matrix y2 = tape.value(tape.softmax_rows(tape.constant(shifted)));
        for (std::size_t i = 0; i < y.rows(); ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < y.cols(); ++j) s += y(i, j);
            CHECK(std::fabs(s - 1.0) <= 1e-9);
        }
        CHECK(max_abs_diff(y, y2) <= 1e-9);
    }
}

TEST_CASE("masked softmax zeroes masked entries exactly") {
    Tape tape;
    Matrix m = Matrix::from_rows({{5.0, 1.0, -2.0}, {0.0, 0.0, 0.0}});
    Matrix mask = Matrix::from_rows({{1.0, 0.0, 1.0}, {0.0, 1.0, 1.0}});
    const Matrix& y = tape.value(tape.masked_softmax_rows(tape.constant(m), mask));
    CHECK(y(0, 1) == 0.0);
    CHECK(y(1, 0) == 0.0);
    CHECK(y(0, 0) + y(0, 2) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(y(1, 1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("elementwise activations") {
    using autodiff::apply_act;
    CHECK(apply_act(Act::Sigmoid, 0.0, 0.0) == doctest::Approx(0.5));
    CHECK(apply_act(Act::Tanh, 0.0, 0.0) == 0.0);
    CHECK(apply_act(Act::LeakyRelu, -1.0, 0.2) == doctest::Approx(-0.2));
    CHECK(apply_act(Act::Relu, -1.0, 0.0) == 0.0);
    CHECK(apply_act(Act::Elu, -1.0, 0.0) == doctest::Approx(std::exp(-1.0) - 1.0));
    CHECK(apply_act(Act::Identity, 1.5, 0.0) == 1.5);
}

TEST_CASE("backward basic cases") {
    Matrix v(1, 1);
    v(0, 0) = 3.0;
    Param p("p", v);

    {
        Tape tape;
        tape.backward(tape.param(p));
        CHECK(p.grad(0, 0) == 1.0);
    }
    p.zero_grad();
    {
        Tape tape;
        Tape::Id x = tape.param(p);
        tape.backward(tape.hadamard(x, x));  // loss = p^2
        CHECK(p.grad(0, 0) == doctest::Approx(6.0));
    }
}

TEST_CASE("gradients accumulate across backward calls") {
    Matrix v(1, 1);
    v(0, 0) = 2.0;
    Param p("p", v);
    for (int i = 0; i < 2; ++i) {
        Tape tape;
        Tape::Id x = tape.param(p);
        tape.backward(tape.hadamard(x, x));
    }
    CHECK(p.grad(0, 0) == doctest::Approx(8.0));  // 2 * 2p
}

TEST_CASE("bce loss closed forms") {
    Tape tape;
    Matrix pred = Matrix::from_rows({{0.5}});
    Matrix y = Matrix::from_rows({{1.0}});
    CHECK(tape.value(tape.bce_loss(tape.constant(pred), y))(0, 0) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));

    Matrix preds = Matrix::from_rows({{0.5, 0.5}});
    Matrix ys = Matrix::from_rows({{0.0, 1.0}});
    CHECK(tape.value(tape.bce_loss(tape.constant(preds), ys))(0, 0) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));

    Matrix perfect = Matrix::from_rows({{1.0}});
    double at_clamp = tape.value(tape.bce_loss(tape.constant(perfect), y))(0, 0);
    CHECK(at_clamp >= 0.0);
    CHECK(at_clamp <= 2e-7);
}

TEST_CASE("col_max picks lowest row on ties") {
    Tape tape;
    Matrix m = Matrix::from_rows({{1.0, 5.0}, {3.0, 5.0}, {3.0, 2.0}});
    Tape::Id id = tape.col_max(tape.constant(m));
    const Matrix& y = tape.value(id);
    CHECK(y(0, 0) == 3.0);
    CHECK(y(0, 1) == 5.0);
    // gradient flows only to the first maximal row per column
    Matrix v = m;
    Param p("p", v);
    Tape t2;
    t2.backward(t2.sum(t2.col_max(t2.param(p))));
    CHECK(p.grad(1, 0) == 1.0);  // row 1 holds the max of column 0
    CHECK(p.grad(2, 0) == 0.0);
    CHECK(p.grad(0, 1) == 1.0);  // tie in column 1 goes to row 0
    CHECK(p.grad(1, 1) == 0.0);
}

TEST_CASE("composite network matches finite differences") {
    Rng rng(17);
    for (int t = 0; t < 5; ++t) {
        Param w1("w1", testutil::random_matrix(4, 3, rng));
        Param w2("w2", testutil::random_matrix(3, 1, rng));
        Param b("b", testutil::random_matrix(1, 1, rng));
        Matrix x = testutil::random_matrix(2, 4, rng);
        Matrix labels = Matrix::from_rows({{1.0}, {0.0}});
        auto eval = [&](bool backward) {
            Tape tape;
            Tape::Id h = tape.activation(Act::Tanh,
                                         tape.matmul(tape.constant(x), tape.param(w1)));
            Tape::Id a = tape.softmax_rows(h);
            Tape::Id logits = tape.matmul(a, tape.param(w2));
            Tape::Id bb = tape.matmul(tape.constant(Matrix::ones(2, 1)), tape.param(b));
            Tape::Id pred = tape.activation(Act::Sigmoid, tape.add(logits, bb));
            Tape::Id loss = tape.bce_loss(pred, labels);
            if (backward) tape.backward(loss);
            return tape.value(loss)(0, 0);
        };
        double err = testutil::max_rel_grad_err({&w1, &w2, &b}, eval);
        CHECK(err <= 1e-4);
    }
}

TEST_CASE("concat cols and reductions match finite differences") {
    Rng rng(23);
    Param a("a", testutil::random_matrix(1, 3, rng));
    Param c("c", testutil::random_matrix(1, 2, rng));
    Matrix labels(1, 1);
    labels(0, 0) = 1.0;
    auto eval = [&](bool backward) {
        Tape tape;
        Tape::Id z = tape.concat_cols(tape.param(a), tape.param(c));
        Tape::Id pred = tape.activation(Act::Sigmoid, tape.col_mean(z));
        Tape::Id loss = tape.bce_loss(tape.sum(tape.scale(pred, 0.2)), labels);
        if (backward) tape.backward(loss);
        return tape.value(loss)(0, 0);
    };
    CHECK(testutil::max_rel_grad_err({&a, &c}, eval) <= 1e-4);
}
