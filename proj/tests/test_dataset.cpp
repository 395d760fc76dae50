#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>
#include <sstream>

#include "plansel/common.hpp"
#include "plansel/dataset.hpp"

using namespace plansel;

namespace {

// Manifest with in-memory graphs only (no files) for fold/correlation tests.
DatasetManifest toy_manifest(std::size_t n, std::size_t domains, std::uint64_t seed = 0) {
    std::mt19937_64 rng(seed);
    DatasetManifest m;
    m.representation = Representation::grounded;
    for (std::size_t i = 0; i < n; ++i) {
        ManifestEntry e;
        e.task_id = "task" + std::to_string(i);
        e.domain = "dom" + std::to_string(i % domains);
        e.graph = make_planning_graph(e.task_id, e.domain, Representation::grounded, 3,
                                      {static_cast<std::int32_t>(rng() % 6), 1, 2},
                                      {{0, 1}, {1, 2}});
        e.labels.task_id = e.task_id;
        e.labels.domain = e.domain;
        for (auto& t : e.labels.runtimes) t = static_cast<double>(rng() % 1800);
        m.entries.push_back(std::move(e));
    }
    return m;
}

std::string random_graph_file(std::mt19937_64& rng) {
    const std::int32_t n = 1 + static_cast<std::int32_t>(rng() % 8);
    std::ostringstream out;
    out << "PSG1 grounded t" << rng() % 100 << " dom\n";
    std::vector<std::pair<int, int>> edges;
    for (int u = 0; u < n; ++u)
        for (int v = 0; v < n; ++v)
            if (u != v && rng() % 3 == 0) edges.emplace_back(u, v);
    // duplicate some edges on purpose; parse must collapse them
    const std::size_t base = edges.size();
    for (std::size_t i = 0; i < base && rng() % 2; ++i) edges.push_back(edges[i]);
    std::shuffle(edges.begin(), edges.end(), rng);
    out << n << ' ' << edges.size() << '\n';
    for (int v = 0; v < n; ++v) out << (v ? " " : "") << rng() % 6;
    out << '\n';
    for (const auto& [u, v] : edges) out << u << ' ' << v << '\n';
    return out.str();
}

}  // namespace

TEST_CASE("graph file parse: minimal, errors, locations") {
    const auto g = parse_graph_file("PSG1 grounded tiny toy\n1 0\n0\n", "mem");
    CHECK(g.num_nodes == 1);
    CHECK(g.task_id == "tiny");
    CHECK(g.domain == "toy");
    CHECK(g.edges.empty());

    CHECK_THROWS_WITH_AS(parse_graph_file("PSG1 grounded t d\n3 1\n0 0 0\n0 5\n", "mem"),
                         doctest::Contains("edge (0,5)"), Error);
    CHECK_THROWS_WITH_AS(parse_graph_file("PSG2 grounded t d\n1 0\n0\n", "mem"),
                         doctest::Contains("PSG1"), Error);
    CHECK_THROWS_WITH_AS(parse_graph_file("PSG1 grounded t d\n2 0\n0\n", "mem"),
                         doctest::Contains("node types"), Error);
    CHECK_THROWS_WITH_AS(parse_graph_file("PSG1 grounded t d\n1 2\n0\n0 0\n", "mem"),
                         doctest::Contains("declares 2 edges"), Error);
    CHECK_THROWS_AS(parse_graph_file("PSG1 floating t d\n1 0\n0\n", "mem"), Error);
    CHECK_THROWS_WITH_AS(parse_graph_file("PSG1 grounded t d\n1 0\nx\n", "mem"),
                         doctest::Contains("not an integer"), Error);
}

TEST_CASE("serialize(parse(f)) is canonical and a parse fixed point") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        const std::string file = random_graph_file(rng);
        const PlanningGraph g = parse_graph_file(file, "mem");
        const std::string canonical = serialize_graph(g);
        const PlanningGraph g2 = parse_graph_file(canonical, "mem");
        CHECK(g2.task_id == g.task_id);
        CHECK(g2.node_types == g.node_types);
        CHECK(g2.edges == g.edges);
        CHECK(serialize_graph(g2) == canonical);
    }
}

TEST_CASE("label parsing: sentinel, column count, invalid ranges") {
    std::ostringstream header;
    header << "task_id,domain";
    for (int p = 0; p < 17; ++p) header << ",p" << p;

    std::string good = header.str() + "\nt1,dom,1,2,10000,4,5,6,7,8,9,10,11,12,13,14,15,16,1800\n";
    const auto recs = parse_labels(good, "mem");
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].runtimes[2] == 10000.0);
    CHECK(recs[0].runtimes[16] == 1800.0);

    std::string short_row = header.str() + "\nt1,dom,1,2,3\n";
    CHECK_THROWS_WITH_AS(parse_labels(short_row, "mem"), doctest::Contains("19 columns"), Error);

    std::string bad_range = header.str() + "\nt1,dom,1,2,3,4,5,6,7,8,9,10,11,12,13,14,15,16,2500\n";
    CHECK_THROWS_WITH_AS(parse_labels(bad_range, "mem"), doctest::Contains("sentinel"), Error);
    std::string too_big = header.str() + "\nt1,dom,1,2,3,4,5,6,7,8,9,10,11,12,13,14,15,16,10001\n";
    CHECK_THROWS_AS(parse_labels(too_big, "mem"), Error);
    std::string not_num = header.str() + "\nt1,dom,1,2,3,4,5,6,7,8,9,10,11,12,13,14,15,16,abc\n";
    CHECK_THROWS_WITH_AS(parse_labels(not_num, "mem"), doctest::Contains("not numeric"), Error);

    std::string all_sentinel = header.str() + "\nt1,dom";
    for (int p = 0; p < 17; ++p) all_sentinel += ",10000";
    all_sentinel += "\n";
    const auto unsolved = parse_labels(all_sentinel, "mem");
    REQUIRE(unsolved.size() == 1);
    for (double t : unsolved[0].runtimes) CHECK(t == 10000.0);
}

TEST_CASE("binary labels: sentinel 0, boundary 1800 solves") {
    RuntimeLabelSet rec;
    rec.runtimes.fill(10000.0);
    rec.runtimes[0] = 0.5;
    rec.runtimes[1] = 1800.0;
    const auto bits = derive_binary_labels(rec);
    CHECK(bits[0] == 1);
    CHECK(bits[1] == 1);
    for (int p = 2; p < 17; ++p) CHECK(bits[p] == 0);
}

TEST_CASE("best planner: argmin, tie to the lowest index, no-solver flag") {
    RuntimeLabelSet rec;
    rec.runtimes.fill(10000.0);
    rec.runtimes[0] = 5.0;
    rec.runtimes[1] = 3.0;
    CHECK(derive_best_planner(rec).index == 1);
    CHECK_FALSE(derive_best_planner(rec).no_solver);

    rec.runtimes.fill(7.0);
    CHECK(derive_best_planner(rec).index == 0);

    rec.runtimes.fill(10000.0);
    const auto none = derive_best_planner(rec);
    CHECK(none.index == 0);
    CHECK(none.no_solver);
}

TEST_CASE("random folds partition with near-equal test sizes") {
    const auto manifest = toy_manifest(2439, 30);
    const auto folds = make_folds(manifest, SplitMode::random, 10, 17);
    REQUIRE(folds.size() == 10);
    std::multiset<std::string> seen;
    for (const auto& f : folds) {
        CHECK(f.test_ids.size() >= 243);
        CHECK(f.test_ids.size() <= 244);
        CHECK(f.train_ids.size() + f.test_ids.size() == 2439);
        for (const auto& id : f.test_ids) seen.insert(id);
        // train and test are disjoint
        std::set<std::string> train(f.train_ids.begin(), f.train_ids.end());
        for (const auto& id : f.test_ids) CHECK_FALSE(train.count(id));
    }
    CHECK(seen.size() == 2439);  // exact partition across folds

    // determinism
    const auto again = make_folds(manifest, SplitMode::random, 10, 17);
    for (std::size_t f = 0; f < folds.size(); ++f) CHECK(again[f].test_ids == folds[f].test_ids);
    const auto other = make_folds(manifest, SplitMode::random, 10, 18);
    bool all_same = true;
    for (std::size_t f = 0; f < folds.size(); ++f)
        all_same = all_same && other[f].test_ids == folds[f].test_ids;
    CHECK_FALSE(all_same);
}

TEST_CASE("domain folds never split a domain") {
    const auto manifest = toy_manifest(200, 23);
    const auto folds = make_folds(manifest, SplitMode::domain_preserving, 5, 3);
    REQUIRE(folds.size() == 5);
    for (const auto& f : folds) {
        std::set<std::string> test_domains, train_domains;
        for (const auto& id : f.test_ids) test_domains.insert(manifest.by_id(id).domain);
        for (const auto& id : f.train_ids) train_domains.insert(manifest.by_id(id).domain);
        for (const auto& d : test_domains) CHECK_FALSE(train_domains.count(d));
    }

    // two domains, two folds: one fold tests all of A, the other all of B
    const auto two = toy_manifest(10, 2);
    const auto folds2 = make_folds(two, SplitMode::domain_preserving, 2, 0);
    std::set<std::string> d0, d1;
    for (const auto& id : folds2[0].test_ids) d0.insert(two.by_id(id).domain);
    for (const auto& id : folds2[1].test_ids) d1.insert(two.by_id(id).domain);
    CHECK(d0.size() == 1);
    CHECK(d1.size() == 1);
    CHECK(d0 != d1);

    CHECK_THROWS_WITH_AS(make_folds(two, SplitMode::domain_preserving, 3, 0),
                         doctest::Contains("domains"), Error);
}

TEST_CASE("ingesting a paper-style split reproduces 2294/145") {
    const auto manifest = toy_manifest(2439, 30);
    const auto ids = manifest.task_ids();
    // build a plausible provided split: 10 folds of 145 test tasks each
    std::mt19937_64 rng(5);
    std::vector<std::string> shuffled = ids;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    std::ostringstream file;
    for (int f = 0; f < 10; ++f) {
        file << "fold " << f << " test";
        for (int j = 0; j < 145; ++j) file << ' ' << shuffled[(f * 145 + j) % shuffled.size()];
        file << '\n';
    }
    const auto folds = parse_split_file(file.str(), ids);
    REQUIRE(folds.size() == 10);
    for (const auto& f : folds) {
        CHECK(f.test_ids.size() == 145);
        CHECK(f.train_ids.size() == 2294);
        CHECK(f.mode == SplitMode::ingested);
    }

    CHECK_THROWS_WITH_AS(parse_split_file("fold 0 test nope\n", ids),
                         doctest::Contains("unknown task id"), Error);

    // serialize -> parse round trip for generated folds
    const auto generated = make_folds(manifest, SplitMode::random, 10, 3);
    const auto reparsed = parse_split_file(serialize_splits(generated), ids);
    for (std::size_t f = 0; f < generated.size(); ++f) {
        CHECK(reparsed[f].test_ids == generated[f].test_ids);
        CHECK(reparsed[f].train_ids == generated[f].train_ids);
    }
}

TEST_CASE("correlation: identity, degenerate flags, full matrix shape") {
    auto manifest = toy_manifest(40, 4, 2);
    // plant a perfect signal: time label equals node-type scalar
    for (auto& e : manifest.entries) {
        const double mean_type =
            (e.graph.node_types[0] + e.graph.node_types[1] + e.graph.node_types[2]) / 3.0;
        for (auto& t : e.labels.runtimes) t = 100.0 * mean_type;
    }
    const auto vocab = NodeTypeVocab::standard(Representation::grounded);
    const auto cm =
        feature_label_correlation(manifest, vocab, FeatureConfig::parse("type+inoutdeg"));
    REQUIRE(cm.names.size() == 5);  // node_type, in_degree, out_degree, time, solvable
    CHECK(cm.r.rows == 5);
    const auto idx = [&](const std::string& name) {
        return std::find(cm.names.begin(), cm.names.end(), name) - cm.names.begin();
    };
    const auto t = idx("time_label");
    const auto nt = idx("node_type");
    CHECK(cm.r.at(nt, t) == doctest::Approx(1.0));
    CHECK(cm.r.at(t, nt) == cm.r.at(nt, t));
    for (std::size_t i = 0; i < cm.names.size(); ++i) CHECK(cm.r.at(i, i) == 1.0);

    // every toy graph has the same 2 edges on 3 nodes: degree scalar is constant
    const auto ind = idx("in_degree");
    CHECK(cm.degenerate[ind]);
    CHECK(cm.r.at(ind, t) == 0.0);
    // solvable bit is constant 1 across the dataset
    CHECK(cm.degenerate[idx("solvable_label")]);

    CHECK_THROWS_AS(feature_label_correlation(toy_manifest(2, 2), vocab, FeatureConfig{}), Error);
}
