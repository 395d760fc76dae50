#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "plansel/common.hpp"
#include "plansel/gbdt.hpp"

using namespace plansel;
using gbdt::BoostConfig;
using gbdt::BoostedEnsemble;
using gbdt::Objective;
using gbdt::RegressionTree;

namespace {

Matrix random_features(std::mt19937_64& rng, std::size_t n, std::size_t d) {
    std::uniform_real_distribution<double> dist(-3.0, 3.0);
    Matrix x(n, d);
    for (double& v : x.v) v = dist(rng);
    return x;
}

// Exhaustive depth-1 oracle: every (feature, midpoint) candidate scored by
// fresh summation, same tie-break order as the implementation contract.
struct OracleSplit {
    bool found = false;
    std::int32_t feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
    double left_weight = 0.0, right_weight = 0.0;
};

OracleSplit brute_force_split(const Matrix& x, const std::vector<double>& g,
                              const std::vector<double>& h, double lambda, double gamma) {
    OracleSplit best;
    double gsum = 0.0, hsum = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) {
        gsum += g[i];
        hsum += h[i];
    }
    const double parent = gsum * gsum / (hsum + lambda);
    for (std::int32_t f = 0; f < static_cast<std::int32_t>(x.cols); ++f) {
        std::vector<std::pair<double, std::size_t>> vals;
        for (std::size_t i = 0; i < x.rows; ++i) vals.emplace_back(x.at(i, f), i);
        std::sort(vals.begin(), vals.end());
        double gl = 0.0, hl = 0.0;
        for (std::size_t pos = 0; pos + 1 < vals.size(); ++pos) {
            gl += g[vals[pos].second];
            hl += h[vals[pos].second];
            if (vals[pos + 1].first <= vals[pos].first) continue;
            const double threshold = 0.5 * (vals[pos].first + vals[pos + 1].first);
            const double gr = gsum - gl, hr = hsum - hl;
            const double gain =
                0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent) - gamma;
            const bool better =
                !best.found || gain > best.gain ||
                (gain == best.gain &&
                 (f < best.feature || (f == best.feature && threshold < best.threshold)));
            if (better) {
                best = {true, f, threshold, gain, 0.0, 0.0};
                double lg = 0.0, lh = 0.0, rg = 0.0, rh = 0.0;
                for (std::size_t i = 0; i < x.rows; ++i) {
                    if (x.at(i, f) < threshold) {
                        lg += g[i];
                        lh += h[i];
                    } else {
                        rg += g[i];
                        rh += h[i];
                    }
                }
                best.left_weight = -lg / (lh + lambda);
                best.right_weight = -rg / (rh + lambda);
            }
        }
    }
    if (best.found && best.gain <= 0.0) best.found = false;
    return best;
}

}  // namespace

TEST_CASE("grad_hess closed forms") {
    Matrix margins(1, 1, 0.0);
    Matrix g, h;
    gbdt::grad_hess(Objective::squared, std::vector<double>{3.0}, margins, g, h);
    CHECK(g.at(0, 0) == -3.0);
    CHECK(h.at(0, 0) == 1.0);

    gbdt::grad_hess(Objective::logistic, std::vector<double>{1.0}, margins, g, h);
    CHECK(g.at(0, 0) == doctest::Approx(-0.5));
    CHECK(h.at(0, 0) == doctest::Approx(0.25));

    Matrix m2(1, 2, 0.7);  // equal margins
    gbdt::grad_hess(Objective::softmax, std::vector<double>{0.0}, m2, g, h);
    CHECK(g.at(0, 0) == doctest::Approx(-0.5));
    CHECK(g.at(0, 1) == doctest::Approx(0.5));
    CHECK(h.at(0, 0) == doctest::Approx(0.25));

    CHECK_THROWS_AS(gbdt::grad_hess(Objective::softmax, std::vector<double>{5.0}, m2, g, h), Error);
}

TEST_CASE("fit_tree: depth 0 leaf weight is -G/(H+lambda)") {
    Matrix x(2, 1);
    x.at(0, 0) = 0.0;
    x.at(1, 0) = 1.0;
    // squared loss at yhat=0 with y=[1,3]: g=[-1,-3], h=[1,1]
    BoostConfig config;
    config.max_depth = 0;
    config.lambda = 0.0;
    const auto tree =
        gbdt::fit_tree(x, std::vector<double>{-1.0, -3.0}, std::vector<double>{1.0, 1.0}, config);
    REQUIRE(tree.nodes.size() == 1);
    CHECK(tree.nodes[0].is_leaf);
    CHECK(tree.nodes[0].weight == doctest::Approx(2.0));  // mean residual

    // all-zero gradients: no split has positive gain, single zero leaf
    BoostConfig deep;
    deep.max_depth = 5;
    const auto flat =
        gbdt::fit_tree(x, std::vector<double>{0.0, 0.0}, std::vector<double>{1.0, 1.0}, deep);
    REQUIRE(flat.nodes.size() == 1);
    CHECK(flat.nodes[0].weight == 0.0);
}

TEST_CASE("fit_tree depth 1 matches the brute-force oracle exactly") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(seed);
        for (std::size_t n : {2u, 3u, 7u, 16u, 64u}) {
            for (std::size_t d : {1u, 2u, 4u}) {
                const Matrix x = random_features(rng, n, d);
                std::vector<double> g(n), h(n);
                std::uniform_real_distribution<double> gd(-2.0, 2.0);
                std::uniform_real_distribution<double> hd(0.1, 2.0);
                for (std::size_t i = 0; i < n; ++i) {
                    g[i] = gd(rng);
                    h[i] = hd(rng);
                }
                BoostConfig config;
                config.max_depth = 1;
                config.lambda = seed % 2 ? 1.0 : 0.0;
                const auto tree = gbdt::fit_tree(x, g, h, config);
                const auto oracle = brute_force_split(x, g, h, config.lambda, config.gamma);
                if (!oracle.found) {
                    CHECK(tree.nodes.size() == 1);
                    continue;
                }
                REQUIRE(tree.nodes.size() == 3);
                CHECK(tree.nodes[0].feature == oracle.feature);
                CHECK(tree.nodes[0].threshold == oracle.threshold);
                CHECK(tree.nodes[tree.nodes[0].left].weight == doctest::Approx(oracle.left_weight).epsilon(1e-12));
                CHECK(tree.nodes[tree.nodes[0].right].weight == doctest::Approx(oracle.right_weight).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("leaf weights equal -G/(H+lambda) for the samples routed there") {
    std::mt19937_64 rng(11);
    const Matrix x = random_features(rng, 50, 3);
    std::vector<double> g(50), h(50);
    std::uniform_real_distribution<double> gd(-2.0, 2.0);
    std::uniform_real_distribution<double> hd(0.05, 1.5);
    for (std::size_t i = 0; i < 50; ++i) {
        g[i] = gd(rng);
        h[i] = hd(rng);
    }
    BoostConfig config;
    config.max_depth = 4;
    config.lambda = 0.7;
    const auto tree = gbdt::fit_tree(x, g, h, config);

    // route every sample by hand and re-derive each leaf weight
    std::map<std::int32_t, std::pair<double, double>> leaf_gh;
    for (std::size_t i = 0; i < 50; ++i) {
        std::int32_t at = 0;
        while (!tree.nodes[at].is_leaf)
            at = x.at(i, tree.nodes[at].feature) < tree.nodes[at].threshold ? tree.nodes[at].left
                                                                            : tree.nodes[at].right;
        leaf_gh[at].first += g[i];
        leaf_gh[at].second += h[i];
    }
    for (const auto& [leaf, gh] : leaf_gh)
        CHECK(tree.nodes[leaf].weight ==
              doctest::Approx(-gh.first / (gh.second + config.lambda)).epsilon(1e-12));
}

TEST_CASE("monotone feature transforms keep the training-sample routing") {
    std::mt19937_64 rng(13);
    const Matrix x = random_features(rng, 40, 3);
    std::vector<double> g(40), h(40, 1.0);
    std::uniform_real_distribution<double> gd(-1.0, 1.0);
    for (double& v : g) v = gd(rng);
    BoostConfig config;
    config.max_depth = 3;

    Matrix tx = x;
    for (std::size_t i = 0; i < tx.rows; ++i) {
        tx.at(i, 0) = std::exp(tx.at(i, 0));               // strictly increasing
        tx.at(i, 1) = tx.at(i, 1) * tx.at(i, 1) * tx.at(i, 1) + 2.0 * tx.at(i, 1);
        tx.at(i, 2) = std::atan(tx.at(i, 2));
    }
    const auto t1 = gbdt::fit_tree(x, g, h, config);
    const auto t2 = gbdt::fit_tree(tx, g, h, config);

    auto leaf_of = [](const RegressionTree& t, const Matrix& m, std::size_t i) {
        std::int32_t at = 0;
        while (!t.nodes[at].is_leaf)
            at = m.at(i, t.nodes[at].feature) < t.nodes[at].threshold ? t.nodes[at].left
                                                                      : t.nodes[at].right;
        return at;
    };
    // routing equality: same partition of training rows into leaves
    std::map<std::int32_t, std::int32_t> pairing;
    for (std::size_t i = 0; i < x.rows; ++i) {
        const auto a = leaf_of(t1, x, i);
        const auto b = leaf_of(t2, tx, i);
        const auto [it, inserted] = pairing.try_emplace(a, b);
        CHECK(it->second == b);
        CHECK(t1.nodes[a].weight == doctest::Approx(t2.nodes[b].weight).epsilon(1e-12));
    }
}

TEST_CASE("boosting: one depth-0 round with unit shrinkage recovers the mean") {
    std::mt19937_64 rng(17);
    const Matrix x = random_features(rng, 10, 2);
    std::vector<double> y(10);
    std::uniform_real_distribution<double> yd(-5.0, 5.0);
    for (double& v : y) v = yd(rng);
    BoostConfig config;
    config.rounds = 1;
    config.max_depth = 0;
    config.lambda = 0.0;
    config.learning_rate = 1.0;
    const auto e = gbdt::boost_fit(x, y, nullptr, {}, config);
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / y.size();
    const Matrix pred = e.predict(x);
    for (std::size_t i = 0; i < 10; ++i) CHECK(pred.at(i, 0) == doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("boosting: y = x^2 regression converges and train loss never increases") {
    Matrix x(200, 1);
    std::vector<double> y(200);
    for (int i = 0; i < 200; ++i) {
        const double v = -1.0 + 2.0 * i / 199.0;
        x.at(i, 0) = v;
        y[i] = v * v;
    }
    BoostConfig config;
    config.rounds = 500;
    config.max_depth = 3;
    config.learning_rate = 0.1;
    config.lambda = 1.0;
    const auto e = gbdt::boost_fit(x, y, nullptr, {}, config);
    const Matrix pred = e.predict(x);
    double mse = 0.0;
    for (int i = 0; i < 200; ++i) {
        const double d = pred.at(i, 0) - y[i];
        mse += d * d;
    }
    CHECK(std::sqrt(mse / 200.0) < 0.05);
    for (std::size_t r = 1; r < e.train_loss.size(); ++r)
        CHECK(e.train_loss[r] <= e.train_loss[r - 1] + 1e-12);
}

TEST_CASE("early stopping marks the best round and never a worse later one") {
    std::mt19937_64 rng(19);
    // pure-noise labels: validation loss deteriorates once the trees overfit
    const Matrix x = random_features(rng, 60, 4);
    const Matrix xv = random_features(rng, 30, 4);
    std::vector<double> y(60), yv(30);
    std::uniform_real_distribution<double> yd(-1.0, 1.0);
    for (double& v : y) v = yd(rng);
    for (double& v : yv) v = yd(rng);
    BoostConfig config;
    config.rounds = 300;
    config.max_depth = 4;
    config.learning_rate = 0.3;
    config.patience = 10;
    const auto e = gbdt::boost_fit(x, y, &xv, yv, config);
    REQUIRE(e.best_round >= 1);
    REQUIRE(!e.valid_loss.empty());
    CHECK(e.rounds.size() < 300);  // stopped early on noise
    const double best = e.valid_loss[e.best_round - 1];
    for (std::size_t r = e.best_round; r < e.valid_loss.size(); ++r) CHECK(best <= e.valid_loss[r]);
}

TEST_CASE("predict: empty ensemble, probabilities, traversal oracle") {
    BoostedEnsemble empty;
    empty.config.objective = Objective::squared;
    empty.base_score = 4.25;
    std::mt19937_64 rng(23);
    const Matrix x = random_features(rng, 5, 2);
    const Matrix pred = empty.predict(x);
    for (std::size_t i = 0; i < 5; ++i) CHECK(pred.at(i, 0) == 4.25);

    // softmax probabilities sum to one
    std::vector<double> yc(30);
    const Matrix xc = random_features(rng, 30, 3);
    for (std::size_t i = 0; i < 30; ++i) yc[i] = static_cast<double>(i % 3);
    BoostConfig config;
    config.rounds = 10;
    config.objective = Objective::softmax;
    config.num_classes = 3;
    config.learning_rate = 0.5;
    const auto e = gbdt::boost_fit(xc, yc, nullptr, {}, config);
    const Matrix proba = e.predict(xc);
    for (std::size_t i = 0; i < proba.rows; ++i) {
        double sum = 0.0;
        for (std::size_t c = 0; c < proba.cols; ++c) sum += proba.at(i, c);
        CHECK(std::abs(sum - 1.0) < 1e-12);
    }

    // single overfit tree: prediction equals the leaf reached by traversal
    std::vector<double> y(20);
    const Matrix xt = random_features(rng, 20, 2);
    std::uniform_real_distribution<double> yd(-2.0, 2.0);
    for (double& v : y) v = yd(rng);
    BoostConfig single;
    single.rounds = 1;
    single.max_depth = 5;
    single.lambda = 0.0;
    single.learning_rate = 1.0;
    const auto e1 = gbdt::boost_fit(xt, y, nullptr, {}, single);
    REQUIRE(e1.rounds.size() == 1);
    const auto& tree = e1.rounds[0][0];
    const Matrix p1 = e1.predict(xt);
    for (std::size_t i = 0; i < 20; ++i) {
        std::int32_t at = 0;
        while (!tree.nodes[at].is_leaf)
            at = xt.at(i, tree.nodes[at].feature) < tree.nodes[at].threshold ? tree.nodes[at].left
                                                                             : tree.nodes[at].right;
        CHECK(p1.at(i, 0) ==
              doctest::Approx(e1.base_score + tree.nodes[at].weight).epsilon(1e-12));
    }
}

TEST_CASE("ensemble text serialization round-trips predictions exactly") {
    std::mt19937_64 rng(29);
    const Matrix x = random_features(rng, 40, 3);
    std::vector<double> y(40);
    for (std::size_t i = 0; i < 40; ++i) y[i] = x.at(i, 0) * 2.0 - x.at(i, 2);
    BoostConfig config;
    config.rounds = 25;
    config.max_depth = 3;
    config.learning_rate = 0.2;
    const auto e = gbdt::boost_fit(x, y, nullptr, {}, config);
    const auto text = gbdt::parse_ensemble(gbdt::serialize_ensemble(e));
    CHECK(text.base_score == e.base_score);
    CHECK(text.best_round == e.best_round);
    CHECK(text.predict(x).v == e.predict(x).v);

    CHECK_THROWS_AS(gbdt::parse_ensemble("garbage"), Error);
}

TEST_CASE("config validation") {
    BoostConfig bad;
    bad.rounds = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = BoostConfig{};
    bad.lambda = -1.0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = BoostConfig{};
    bad.objective = Objective::softmax;
    bad.num_classes = 1;
    CHECK_THROWS_AS(bad.validate(), Error);
}
