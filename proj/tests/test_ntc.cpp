#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "bidscreen/metrics.hpp"
#include "bidscreen/ntc.hpp"
#include "bidscreen/random.hpp"

using namespace bidscreen;
using namespace bidscreen::ntc;

namespace {

Params small(int trees, int depth, std::size_t min_leaf, double lr = 0.1) {
    Params p;
    p.n_trees = trees;
    p.max_depth = depth;
    p.min_leaf = min_leaf;
    p.learning_rate = lr;
    return p;
}

std::vector<double> train_scores(const Model& m, const Matrix& x) { return m.predict_proba(x); }

}  // namespace

TEST_CASE("one Newton-step tree matches the hand computation") {
    // x = 1..4, y = 0,1,1,1. Base score log(3); p = 3/4 everywhere; residuals y - p and
    // hessians p(1-p) = 3/16. The best least-squares split isolates x = 1.
    const Matrix x(1, {1, 2, 3, 4});
    const std::vector<int> y = {0, 1, 1, 1};
    const Model m = fit(x, y, small(1, 1, 1, 1.0), 7);
    const double base = std::log(3.0);
    const double h = 0.75 * 0.25;
    const double left = (0 - 0.75) / h;
    const double right = 3 * (1 - 0.75) / (3 * h);
    CHECK(std::abs(m.base_score() - base) <= 1e-12);
    REQUIRE(m.trees().size() == 1);
    const auto& nodes = m.trees()[0].nodes;
    REQUIRE(nodes.size() == 3);
    CHECK(nodes[0].feature == 0);
    CHECK(nodes[0].threshold == 1.5);
    CHECK(std::abs(nodes[std::size_t(nodes[0].left)].value - left) <= 1e-9);
    CHECK(std::abs(nodes[std::size_t(nodes[0].right)].value - right) <= 1e-9);

    const double xs[] = {1.0};
    const double xr[] = {3.0};
    CHECK(std::abs(m.predict_proba(xs) - 1.0 / (1.0 + std::exp(-(base + left)))) <= 1e-9);
    CHECK(std::abs(m.predict_proba(xr) - 1.0 / (1.0 + std::exp(-(base + right)))) <= 1e-9);
}

TEST_CASE("separable 1-D data: depth-1, 10 trees give training AUC 1") {
    std::vector<double> xs;
    std::vector<int> y;
    Rng rng(1);
    for (int i = 0; i < 200; ++i) {
        const double v = rng.uniform(-1, 1);
        if (v == 0.0) continue;
        xs.push_back(v);
        y.push_back(v > 0 ? 1 : 0);
    }
    const Matrix x(1, xs);
    const Model m = fit(x, y, small(10, 1, 1), 1);
    CHECK(metrics::roc_auc(train_scores(m, x), y) == 1.0);
}

TEST_CASE("constant features and zero trees predict the base rate") {
    const Matrix x(2, {1, 1, 1, 1, 1, 1, 1, 1});
    const std::vector<int> y = {1, 0, 1, 1};
    const Model m = fit(x, y, small(5, 3, 1), 1);
    for (double p : m.predict_proba(x)) CHECK(p == doctest::Approx(0.75).epsilon(1e-12));

    const Model zero(3, 0.0, Params{});
    const double v[] = {1, 2, 3};
    CHECK(zero.predict_proba(v) == 0.5);
    const double wrong[] = {1, 2};
    CHECK_THROWS_AS(zero.margin(wrong), Error);
}

TEST_CASE("single-class training set is rejected") {
    const Matrix x(1, {1, 2, 3});
    const std::vector<int> y = {1, 1, 1};
    CHECK_THROWS_WITH_AS(fit(x, y, Params{}, 1), "degenerate training set", Error);
}

TEST_CASE("stump predictions are constant on each side of the threshold") {
    const Matrix x(1, {0, 1, 2, 3, 4, 5, 6, 7});
    const std::vector<int> y = {0, 0, 1, 0, 1, 1, 1, 1};
    const Model m = fit(x, y, small(1, 1, 2), 3);
    const double t = m.trees()[0].nodes[0].threshold;
    for (double a : {-10.0, t - 1e-9, 0.5}) {
        const double xa[] = {a}, x0[] = {-10.0};
        if (a < t) CHECK(m.predict_proba(xa) == m.predict_proba(x0));
    }
    const double hi1[] = {t}, hi2[] = {100.0};
    CHECK(m.predict_proba(hi1) == m.predict_proba(hi2));
}

TEST_CASE("model save and load reproduce predictions exactly") {
    Rng rng(5);
    std::vector<double> d;
    std::vector<int> y;
    for (int i = 0; i < 300; ++i) {
        const double a = rng.normal(), b = rng.normal();
        d.push_back(a);
        d.push_back(b);
        y.push_back(a + 0.5 * b + rng.normal(0, 0.5) > 0 ? 1 : 0);
    }
    const Matrix x(2, d);
    const Model m = fit(x, y, small(20, 3, 5), 11);
    std::stringstream buf;
    m.save(buf);
    CHECK(buf.str().rfind("bidscreen-ntc 1\n", 0) == 0);
    const Model back = Model::load(buf);
    CHECK(back.predict_proba(x) == m.predict_proba(x));
    std::stringstream again;
    back.save(again);
    CHECK(again.str() == buf.str());

    std::istringstream bad("bidscreen-ntc 99\n");
    CHECK_THROWS_AS(Model::load(bad), Error);
    std::istringstream truncated(buf.str().substr(0, buf.str().size() / 2));
    CHECK_THROWS_AS(Model::load(truncated), Error);
}

TEST_CASE("a tree with zero leaf values leaves predictions unchanged") {
    const Matrix x(1, {1, 2, 3, 4, 5, 6});
    const std::vector<int> y = {0, 1, 0, 1, 1, 1};
    Model m = fit(x, y, small(3, 2, 1), 2);
    const auto before = m.predict_proba(x);
    Tree t;
    t.nodes = {Node{0, 3.5, 1, 2, 0.0}, Node{-1, 0, -1, -1, 0.0}, Node{-1, 0, -1, -1, 0.25}};
    m.add_tree(t);
    const auto after = m.predict_proba(x);
    for (std::size_t i = 0; i < 3; ++i) CHECK(after[i] == before[i]);  // x < 3.5
    for (std::size_t i = 3; i < 6; ++i) CHECK(after[i] > before[i]);
}

TEST_CASE("strictly increasing transform of a feature leaves training predictions unchanged") {
    Rng rng(9);
    std::vector<double> a, b;
    std::vector<int> y;
    for (int i = 0; i < 400; ++i) {
        const double u = rng.normal(), v = rng.normal();
        a.push_back(u);
        a.push_back(v);
        b.push_back(std::exp(u));
        b.push_back(v);
        y.push_back(u - v + rng.normal() > 0 ? 1 : 0);
    }
    const Params p = small(15, 3, 10);
    const auto pa = fit(Matrix(2, a), y, p, 4).predict_proba(Matrix(2, a));
    const auto pb = fit(Matrix(2, b), y, p, 4).predict_proba(Matrix(2, b));
    CHECK(pa == pb);
}

TEST_CASE("folds: stratified partition with sizes differing by at most one") {
    std::vector<int> y(103, 0);
    for (std::size_t i = 0; i < y.size(); i += 3) y[i] = 1;
    const auto f = make_folds(y, 5, 42);
    REQUIRE(f.fold.size() == y.size());
    std::vector<int> size(5, 0), pos(5, 0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        REQUIRE(f.fold[i] >= 0);
        REQUIRE(f.fold[i] < 5);
        ++size[std::size_t(f.fold[i])];
        pos[std::size_t(f.fold[i])] += y[i];
    }
    CHECK(*std::max_element(size.begin(), size.end()) - *std::min_element(size.begin(), size.end()) <= 1);
    CHECK(*std::max_element(pos.begin(), pos.end()) - *std::min_element(pos.begin(), pos.end()) <= 1);
    CHECK(make_folds(y, 5, 42).fold == f.fold);
    CHECK(make_folds(y, 5, 43).fold != f.fold);
    CHECK_THROWS_AS(make_folds(y, 1, 1), Error);
}

TEST_CASE("leave-one-out on six separable points puts every score on the right side") {
    const Matrix x(1, {-3, -2, -1, 1, 2, 3});
    const std::vector<int> y = {0, 0, 0, 1, 1, 1};
    const auto s = cross_val_scores(x, y, small(10, 1, 1, 0.5), 6, 1);
    for (std::size_t i = 0; i < 6; ++i) {
        CAPTURE(i);
        CHECK((s[i] > 0.5) == (y[i] == 1));
    }
}

TEST_CASE("a fold whose training part has one class is reported by number") {
    const Matrix x(1, {1, 2, 3, 4, 5, 6});
    const std::vector<int> y = {1, 0, 0, 0, 0, 0};
    try {
        cross_val_scores(x, y, small(2, 1, 1), 2, 1);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("fold") != std::string::npos);
    }
}

TEST_CASE("duplicated rows in the same fold get identical scores; threads do not matter") {
    Rng rng(12);
    std::vector<double> d;
    std::vector<int> y;
    for (int i = 0; i < 150; ++i) {
        const double a = rng.normal(), b = rng.uniform();
        const int label = a + rng.normal() > 0 ? 1 : 0;
        for (int copy = 0; copy < 2; ++copy) {
            d.push_back(a);
            d.push_back(b);
            y.push_back(label);
        }
    }
    const Matrix x(2, d);
    const auto folds = make_folds(y, 4, 3);
    const auto s1 = cross_val_scores(x, y, small(20, 3, 5), folds, 1);
    const auto s3 = cross_val_scores(x, y, small(20, 3, 5), folds, 3);
    CHECK(s1 == s3);
    std::size_t same_fold = 0;
    for (std::size_t i = 0; i < y.size(); i += 2)
        if (folds.fold[i] == folds.fold[i + 1]) {
            ++same_fold;
            CHECK(s1[i] == s1[i + 1]);
        }
    CHECK(same_fold > 0);
}

TEST_CASE("random labels: out-of-fold AUC stays near one half over 20 seeds") {
    double total = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Rng rng(seed * 7919);
        std::vector<double> d;
        std::vector<int> y;
        for (int i = 0; i < 600; ++i) {
            for (int f = 0; f < 4; ++f) d.push_back(rng.normal());
            y.push_back(int(rng.below(2)));
        }
        const auto s = cross_val_scores(Matrix(4, d), y, small(30, 3, 20), 5, seed);
        const double auc = metrics::roc_auc(s, y);
        CAPTURE(seed);
        CHECK(auc >= 0.4);
        CHECK(auc <= 0.6);
        total += auc;
    }
    CHECK(total / 20 >= 0.4);
    CHECK(total / 20 <= 0.6);
}

TEST_CASE("ranking property: classifier scores follow the true posterior") {
    // Labelled from N(0, I); unlabelled half N(0, I), half N((1, 1), I). The true posterior
    // depends on x only through x1 + x2.
    Rng rng(21);
    std::vector<double> d, truth;
    std::vector<int> s;
    const int n = 10000;
    for (int i = 0; i < 2 * n; ++i) {
        const bool labelled = i < n;
        const bool negative = !labelled && rng.bernoulli(0.5);
        const double a = rng.normal(negative ? 1.0 : 0.0), b = rng.normal(negative ? 1.0 : 0.0);
        d.push_back(a);
        d.push_back(b);
        s.push_back(labelled ? 1 : 0);
        // f_pos / f_neg = exp(1 - (x1 + x2))
        const double lr = std::exp(1.0 - (a + b));
        truth.push_back(lr / (lr + 1.0));  // P(y = 1 | x) with equal mixture weights
    }
    const auto scores = cross_val_scores(Matrix(2, d), s, small(100, 2, 50), 5, 8);
    CHECK(metrics::spearman(scores, truth) >= 0.95);
}

TEST_CASE("histogram mode and early stopping") {
    Rng rng(31);
    std::vector<double> d;
    std::vector<int> y;
    for (int i = 0; i < 2000; ++i) {
        const double a = rng.normal(), b = rng.normal();
        d.push_back(a);
        d.push_back(b);
        y.push_back(a * b + rng.normal(0, 0.3) > 0 ? 1 : 0);
    }
    const Matrix x(2, d);
    Params p = small(60, 3, 10);
    p.histogram = true;
    p.bins = 32;
    const Model hist = fit(x, y, p, 1);
    CHECK(metrics::roc_auc(hist.predict_proba(x), y) > 0.9);
    CHECK(fit(x, y, p, 1).predict_proba(x) == hist.predict_proba(x));

    p.histogram = false;
    p.n_trees = 500;
    p.learning_rate = 0.5;
    p.early_stopping_rounds = 5;
    const Model es = fit(x, y, p, 1);
    CHECK(es.trees().size() < 500);
    CHECK(es.trees().size() >= 1);

    Params bad;
    bad.learning_rate = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("metrics helpers") {
    const std::vector<double> s = {0.1, 0.4, 0.35, 0.8};
    const std::vector<int> y = {0, 0, 1, 1};
    CHECK(metrics::roc_auc(s, y) == 0.75);
    CHECK(metrics::roc_auc(std::vector<double>{1, 1}, std::vector<int>{0, 1}) == 0.5);
    CHECK_THROWS_AS(metrics::roc_auc(s, std::vector<int>{1, 1, 1, 1}), Error);
    CHECK(metrics::ranks(std::vector<double>{3, 1, 3}) == std::vector<double>{2.5, 1, 2.5});
    CHECK(metrics::spearman(std::vector<double>{1, 2, 3}, std::vector<double>{10, 20, 35}) ==
          doctest::Approx(1.0));
}
