#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gradcheck.hpp"
#include "vhda/graph.hpp"
#include "vhda/nn.hpp"
#include "vhda/rng.hpp"

using namespace vhda;

TEST_CASE("rng determinism and derivation") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
    Rng c(42);
    Rng child = c.derive(7);
    CHECK(c.uniform() == Rng(42).uniform());  // derive does not advance the parent
    Rng child2 = Rng(42).derive(7);
    CHECK(child.uniform() == child2.uniform());
}

TEST_CASE("rng normal moments") {
    Rng rng(123);
    const int n = 100000;
    double mean = 0.0, var = 0.0;
    std::vector<double> xs(n);
    for (int i = 0; i < n; ++i) {
        xs[i] = rng.normal();
        mean += xs[i];
    }
    mean /= n;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= n;
    CHECK(std::abs(mean) < 0.02);
    CHECK(var > 0.98);
    CHECK(var < 1.02);
}

TEST_CASE("matmul forward") {
    Mat A(2, 3), B(3, 2);
    int v = 1;
    for (double& x : A.a) x = v++;
    for (double& x : B.a) x = v++;
    Mat C(2, 2);
    gemm(A, B, C);
    // A = [1 2 3; 4 5 6], B = [7 8; 9 10; 11 12]
    CHECK(C(0, 0) == doctest::Approx(58));
    CHECK(C(0, 1) == doctest::Approx(64));
    CHECK(C(1, 0) == doctest::Approx(139));
    CHECK(C(1, 1) == doctest::Approx(154));
}

TEST_CASE("graph op values") {
    Graph g;
    Ex x = g.constant(Mat::column({1.0, 2.0, 3.0}));
    CHECK(g.scalar(sum(x)) == doctest::Approx(6.0));
    Ex sm = softmax(x);
    double s = 0.0;
    for (int i = 0; i < 3; ++i) s += g.val(sm)(i, 0);
    CHECK(s == doctest::Approx(1.0));
    CHECK(g.scalar(logsumexp(x)) ==
          doctest::Approx(std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0))));
    Ex ls = log_softmax(x);
    CHECK(g.val(ls)(2, 0) == doctest::Approx(3.0 - g.scalar(logsumexp(x))));
}

TEST_CASE("softmax over a single element is exactly one") {
    Graph g;
    Ex x = g.constant(Mat::column({-3.7}));
    CHECK(g.val(softmax(x))(0, 0) == 1.0);
}

static double composite_loss(ParamStore& ps, bool backprop) {
    Graph g;
    Ex W = g.param(*ps.find("W"));
    Ex b = g.param(*ps.find("b"));
    Ex U = g.param(*ps.find("U"));
    Ex x = g.constant(Mat::column({0.3, -0.2, 0.9}));
    Ex h = tanh(g.add(g.matmul(W, x), b));
    Ex scores = g.matmul(U, h);
    Ex p = softmax(scores);
    Ex ls = log_softmax(scores);
    Ex l1 = -g.pick(ls, 1);
    Ex l2 = sum(sigmoid(scores) * p);
    Ex l3 = logsumexp(g.slice_rows(scores, 0, 3));
    Ex l4 = sum(softplus(h) / g.add_scalar(exp(h), 1.0));
    Ex l5 = dot(h, h);
    Ex loss = l1 + l2 + l3 + g.scale(l4, 0.5) + g.scale(l5, 0.25);
    const double v = g.scalar(loss);
    if (backprop) g.backward(loss);
    return v;
}

TEST_CASE("gradcheck composite graph") {
    ParamStore ps;
    Rng rng(7);
    ps.create_xavier("W", 4, 3, rng);
    ps.create_uniform("b", 4, 1, -0.5, 0.5, rng);
    ps.create_xavier("U", 5, 4, rng);
    Rng pick(11);
    auto res = testing::grad_check(
        ps, [&](bool bp) { return composite_loss(ps, bp); }, 40, pick);
    CHECK(res.max_rel_err < 1e-6);
}

static double lstm_loss(ParamStore& ps, LstmCell& cell, Linear& out, bool backprop) {
    Graph g;
    LstmState s = cell.zero_state(g);
    std::vector<Mat> inputs;
    Rng data_rng(3);
    Ex loss = g.scalar_const(0.0);
    for (int t = 0; t < 4; ++t) {
        Mat x(3, 1);
        for (double& v : x.a) v = data_rng.uniform(-1, 1);
        s = cell.step(g, g.constant(std::move(x)), s);
        loss = loss + sum(out(g, s.h) * out(g, s.h));
    }
    const double v = g.scalar(loss);
    if (backprop) g.backward(loss);
    return v;
}

TEST_CASE("gradcheck lstm chain") {
    ParamStore ps;
    Rng rng(5);
    LstmCell cell(ps, "cell", 3, 6, rng);
    Linear out(ps, "out", 6, 2, rng);
    Rng pick(13);
    auto res = testing::grad_check(
        ps, [&](bool bp) { return lstm_loss(ps, cell, out, bp); }, 40, pick);
    CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("concat hstack pick_row gradients") {
    ParamStore ps;
    Rng rng(9);
    ps.create_uniform("E", 5, 3, -1, 1, rng);
    auto loss_fn = [&](bool bp) {
        Graph g;
        Ex E = g.param(*ps.find("E"));
        Ex a = g.pick_row(E, 1);
        Ex b = g.pick_row(E, 3);
        Ex c = g.pick_row(E, 1);  // repeated row: gradients must accumulate
        Ex cat = concat_rows(std::vector<Ex>{a, b});
        Ex H = hstack(std::vector<Ex>{a, b, c});
        Ex w = softmax(g.constant(Mat::column({0.1, 0.5, -0.2})));
        Ex mix = g.matmul(H, w);
        Ex loss = dot(mix, mix) + sum(cat * cat);
        const double v = g.scalar(loss);
        if (bp) g.backward(loss);
        return v;
    };
    Rng pick(17);
    auto res = testing::grad_check(ps, loss_fn, 15, pick);
    CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("adam decreases a quadratic") {
    ParamStore ps;
    Rng rng(1);
    Parameter& w = ps.create_uniform("w", 4, 1, -2, 2, rng);
    Adam opt;
    AdamConfig cfg;
    cfg.lr = 0.05;
    double first = 0.0, last = 0.0;
    for (int step = 0; step < 200; ++step) {
        Graph g;
        Ex wx = g.param(w);
        Ex loss = dot(wx, wx);
        if (step == 0) first = g.scalar(loss);
        last = g.scalar(loss);
        ps.zero_grad();
        g.backward(loss);
        opt.step(ps, cfg);
    }
    CHECK(last < 1e-3 * first + 1e-8);
}
