#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>
#include <random>

#include "plansel/common.hpp"
#include "plansel/graph.hpp"

using namespace plansel;

namespace {

PlanningGraph cycle3() {
    return make_planning_graph("c3", "toy", Representation::grounded, 3, {0, 1, 2},
                               {{0, 1}, {1, 2}, {2, 0}});
}

PlanningGraph random_graph(std::mt19937_64& rng, std::int32_t max_nodes = 12) {
    const std::int32_t n = 1 + static_cast<std::int32_t>(rng() % max_nodes);
    std::vector<std::int32_t> types(n);
    for (auto& t : types) t = static_cast<std::int32_t>(rng() % 6);
    std::vector<std::pair<std::int32_t, std::int32_t>> edges;
    for (std::int32_t u = 0; u < n; ++u)
        for (std::int32_t v = 0; v < n; ++v)
            if (u != v && rng() % 3 == 0) edges.emplace_back(u, v);
    return make_planning_graph("rnd", "toy", Representation::grounded, n, std::move(types),
                               std::move(edges));
}

}  // namespace

TEST_CASE("construction validates and canonicalizes") {
    CHECK_THROWS_WITH_AS(make_planning_graph("t", "d", Representation::grounded, 3, {0, 1, 2},
                                             {{0, 5}}),
                         doctest::Contains("edge (0,5)"), Error);
    CHECK_THROWS_WITH_AS(make_planning_graph("t", "d", Representation::grounded, 1, {7}, {}),
                         doctest::Contains("node 0"), Error);
    CHECK_THROWS_AS(make_planning_graph("t", "d", Representation::grounded, 2, {0}, {}), Error);
    // lifted accepts types up to 14
    CHECK_NOTHROW(make_planning_graph("t", "d", Representation::lifted, 1, {14}, {}));

    // duplicates collapse, self-loops drop, edges sort
    const auto g = make_planning_graph("t", "d", Representation::grounded, 3, {0, 0, 0},
                                       {{2, 1}, {0, 1}, {2, 1}, {1, 1}});
    REQUIRE(g.edges.size() == 2);
    CHECK(g.edges[0] == std::pair<std::int32_t, std::int32_t>{0, 1});
    CHECK(g.edges[1] == std::pair<std::int32_t, std::int32_t>{2, 1});
}

TEST_CASE("one-hot node types") {
    const auto vocab = NodeTypeVocab::standard(Representation::grounded);
    REQUIRE(vocab.size() == 6);
    const auto g = make_planning_graph("t", "d", Representation::grounded, 1, {2}, {});
    const auto m = one_hot_node_types(g, vocab);
    REQUIRE(m.rows == 1);
    REQUIRE(m.cols == 6);
    for (int c = 0; c < 6; ++c) CHECK(m.at(0, c) == (c == 2 ? 1.0 : 0.0));

    const auto lifted_vocab = NodeTypeVocab::standard(Representation::lifted);
    REQUIRE(lifted_vocab.size() == 15);
    const auto lg = make_planning_graph("t", "d", Representation::lifted, 1, {0}, {});
    const auto lm = one_hot_node_types(lg, lifted_vocab);
    REQUIRE(lm.cols == 15);
    CHECK(lm.at(0, 0) == 1.0);

    const auto empty = make_planning_graph("e", "d", Representation::grounded, 0, {}, {});
    const auto em = one_hot_node_types(empty, vocab);
    CHECK(em.rows == 0);
    CHECK(em.cols == 6);

    CHECK_THROWS_AS(one_hot_node_types(lg, vocab), Error);
}

TEST_CASE("degree features bucket and cap") {
    const auto isolated = make_planning_graph("i", "d", Representation::grounded, 1, {0}, {});
    const auto m0 = degree_features(isolated, DegreeMode::in, 32);
    REQUIRE(m0.cols == 32);
    CHECK(m0.at(0, 0) == 1.0);

    // star into node 0 with in-degree 100 overflows into the last bucket
    std::vector<std::int32_t> types(101, 0);
    std::vector<std::pair<std::int32_t, std::int32_t>> edges;
    for (std::int32_t u = 1; u <= 100; ++u) edges.emplace_back(u, 0);
    const auto star =
        make_planning_graph("s", "d", Representation::grounded, 101, std::move(types), std::move(edges));
    const auto ms = degree_features(star, DegreeMode::in, 32);
    CHECK(ms.at(0, 31) == 1.0);

    const auto mc = degree_features(cycle3(), DegreeMode::in_out, 4);
    REQUIRE(mc.cols == 8);
    for (int v = 0; v < 3; ++v) {
        CHECK(mc.at(v, 1) == 1.0);      // in-degree 1
        CHECK(mc.at(v, 4 + 1) == 1.0);  // out-degree 1
    }

    CHECK_THROWS_AS(degree_features(cycle3(), DegreeMode::in, 1), Error);
}

TEST_CASE("degree buckets partition: exactly one 1 per direction block") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 25; ++trial) {
        const auto g = random_graph(rng);
        const std::int32_t cap = 2 + static_cast<std::int32_t>(rng() % 6);
        const auto m = degree_features(g, DegreeMode::in_out, cap);
        for (std::int32_t v = 0; v < g.num_nodes; ++v) {
            double in_sum = 0.0, out_sum = 0.0;
            for (std::int32_t c = 0; c < cap; ++c) {
                in_sum += m.at(v, c);
                out_sum += m.at(v, cap + c);
            }
            CHECK(in_sum == 1.0);
            CHECK(out_sum == 1.0);
        }
    }
}

TEST_CASE("neighbor type counts") {
    const auto vocab = NodeTypeVocab::standard(Representation::grounded);
    // two incoming neighbors of type 1
    const auto g = make_planning_graph("t", "d", Representation::grounded, 3, {0, 1, 1},
                                       {{1, 0}, {2, 0}});
    const auto m = neighbor_type_features(g, vocab, NeighborDirection::in);
    REQUIRE(m.cols == 6);
    CHECK(m.at(0, 1) == 2.0);
    for (int c = 0; c < 6; ++c)
        if (c != 1) CHECK(m.at(0, c) == 0.0);

    const auto iso = make_planning_graph("i", "d", Representation::grounded, 1, {3}, {});
    const auto mi = neighbor_type_features(iso, vocab, NeighborDirection::both);
    REQUIRE(mi.cols == 12);
    for (std::size_t c = 0; c < mi.cols; ++c) CHECK(mi.at(0, c) == 0.0);

    // edge u(type 3) -> v(type 5): u's out-block counts v's type, v's in-block counts 3
    const auto uv = make_planning_graph("uv", "d", Representation::grounded, 2, {3, 5}, {{0, 1}});
    const auto mb = neighbor_type_features(uv, vocab, NeighborDirection::both);
    CHECK(mb.at(0, 6 + 5) == 1.0);
    CHECK(mb.at(1, 3) == 1.0);
}

TEST_CASE("assemble_features widths and single-block identity") {
    const auto g = cycle3();
    const auto vocab = NodeTypeVocab::standard(Representation::grounded);
    FeatureConfig c1;
    c1.blocks = {FeatureBlock::node_type, FeatureBlock::in_degree};
    c1.degree_cap = 32;
    CHECK(assemble_features(g, vocab, c1).cols == 38);

    FeatureConfig c2;  // node_type only
    CHECK(assemble_features(g, vocab, c2) == one_hot_node_types(g, vocab));

    const auto lg = make_planning_graph("l", "d", Representation::lifted, 2, {0, 14}, {{0, 1}});
    const auto lvocab = NodeTypeVocab::standard(Representation::lifted);
    FeatureConfig c3;
    c3.blocks = {FeatureBlock::node_type, FeatureBlock::in_degree, FeatureBlock::out_degree};
    c3.degree_cap = 32;
    // independent width summation: 15 + 32 + 32
    std::int32_t expected = 15 + 2 * 32;
    CHECK(assemble_features(lg, lvocab, c3).cols == static_cast<std::size_t>(expected));
    CHECK(feature_width(c3, lvocab) == expected);

    FeatureConfig bad;
    bad.blocks = {FeatureBlock::in_degree};
    CHECK_THROWS_AS(assemble_features(g, vocab, bad), Error);
}

TEST_CASE("assemble width always equals the sum of block widths") {
    std::mt19937_64 rng(6);
    const auto vocab = NodeTypeVocab::standard(Representation::grounded);
    const std::vector<FeatureConfig> configs = {
        FeatureConfig::parse("type"), FeatureConfig::parse("type+indeg"),
        FeatureConfig::parse("type+inoutdeg"), FeatureConfig::parse("type+neigh")};
    for (int trial = 0; trial < 10; ++trial) {
        const auto g = random_graph(rng);
        for (const auto& config : configs) {
            const auto m = assemble_features(g, vocab, config);
            CHECK(m.cols == static_cast<std::size_t>(feature_width(config, vocab)));
            CHECK(m.rows == static_cast<std::size_t>(g.num_nodes));
        }
    }
}

TEST_CASE("feature matrices are permutation-equivariant") {
    std::mt19937_64 rng(8);
    const auto vocab = NodeTypeVocab::standard(Representation::grounded);
    const auto config = FeatureConfig::parse("type+inoutdeg");
    for (int trial = 0; trial < 20; ++trial) {
        const auto g = random_graph(rng);
        std::vector<std::int32_t> perm(g.num_nodes);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        const auto pg = permute_nodes(g, perm);
        const auto m = assemble_features(g, vocab, config);
        const auto pm = assemble_features(pg, vocab, config);
        for (std::int32_t v = 0; v < g.num_nodes; ++v)
            for (std::size_t c = 0; c < m.cols; ++c) CHECK(pm.at(perm[v], c) == m.at(v, c));
    }
}

TEST_CASE("graph_stats exact values and brute-force agreement") {
    const auto s = graph_stats(cycle3());
    CHECK(s.num_edges == 3);
    CHECK(s.avg_in_degree == 1.0);

    const auto single = make_planning_graph("s", "d", Representation::grounded, 1, {4}, {});
    CHECK(graph_stats(single).avg_in_degree == 0.0);
    CHECK(graph_stats(single).per_type_avg_degree.at(4) == 0.0);

    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 20; ++trial) {
        const auto g = random_graph(rng, 100);
        const auto stats = graph_stats(g);
        CHECK(stats.num_nodes == g.num_nodes);
        CHECK(stats.num_edges == static_cast<std::int64_t>(g.edges.size()));
        // brute force per-type degree from the edge list
        std::map<std::int32_t, std::pair<double, int>> acc;
        for (std::int32_t v = 0; v < g.num_nodes; ++v) {
            int deg = 0;
            for (const auto& [a, b] : g.edges) deg += (a == v) + (b == v);
            acc[g.node_types[v]].first += deg;
            acc[g.node_types[v]].second += 1;
        }
        for (const auto& [type, sc] : acc)
            CHECK(stats.per_type_avg_degree.at(type) ==
                  doctest::Approx(sc.first / sc.second).epsilon(1e-12));
    }
}
