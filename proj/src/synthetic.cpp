#include "plansel/synthetic.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "plansel/common.hpp"

namespace plansel::synth {

namespace {

std::vector<std::int32_t> draw_types(std::mt19937_64& rng, std::int32_t n, std::int32_t majority,
                                     std::int32_t vocab_size, double fraction) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::uniform_int_distribution<std::int32_t> other(0, vocab_size - 2);
    while (true) {
        std::vector<std::int32_t> types(n);
        std::vector<std::int32_t> hist(vocab_size, 0);
        for (std::int32_t v = 0; v < n; ++v) {
            if (coin(rng) < fraction) {
                types[v] = majority;
            } else {
                std::int32_t t = other(rng);
                if (t >= majority) t += 1;
                types[v] = t;
            }
            hist[types[v]] += 1;
        }
        const auto top = std::max_element(hist.begin(), hist.end()) - hist.begin();
        if (static_cast<std::int32_t>(top) == majority) return types;
        // rare with fraction 0.7; redraw keeps the label a function of the type
    }
}

}  // namespace

DatasetManifest make_benchmark(const SyntheticConfig& config) {
    if (config.num_graphs < 1) throw Error("make_benchmark: need at least one graph");
    const std::int32_t vocab_size = config.representation == Representation::grounded ? 6 : 15;
    std::mt19937_64 rng(config.seed);
    std::uniform_int_distribution<std::int32_t> node_count(config.min_nodes, config.max_nodes);
    std::uniform_int_distribution<std::int32_t> fanout(1, 3);
    std::uniform_real_distribution<double> fast(20.0, 80.0);
    std::uniform_real_distribution<double> slow(900.0, 1500.0);

    DatasetManifest m;
    m.representation = config.representation;
    for (std::int32_t gi = 0; gi < config.num_graphs; ++gi) {
        const std::int32_t majority = gi % 3;
        const std::int32_t n = node_count(rng);
        std::vector<std::int32_t> types =
            draw_types(rng, n, majority, vocab_size, config.majority_fraction);

        std::uniform_int_distribution<std::int32_t> pick(0, n - 1);
        std::vector<std::pair<std::int32_t, std::int32_t>> edges;
        for (std::int32_t v = 0; v < n; ++v) {
            const std::int32_t k = fanout(rng);
            for (std::int32_t j = 0; j < k; ++j) {
                const std::int32_t u = pick(rng);
                if (u != v) edges.emplace_back(v, u);
            }
        }

        ManifestEntry e;
        e.task_id = "synth" + std::to_string(gi);
        e.domain = "dom" + std::to_string(gi % config.num_domains);
        e.graph = make_planning_graph(e.task_id, e.domain, config.representation, n, std::move(types),
                                      std::move(edges));
        e.labels.task_id = e.task_id;
        e.labels.domain = e.domain;
        for (std::int32_t p = 0; p < kNumPlanners; ++p) e.labels.runtimes[p] = kSentinelRuntime;
        e.labels.runtimes[majority] = fast(rng);
        e.labels.runtimes[(majority + 1) % 3] = slow(rng);
        m.entries.push_back(std::move(e));
    }
    return m;
}

void write_benchmark(const DatasetManifest& manifest, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir / "graphs");
    std::ostringstream labels;
    labels.precision(17);
    labels << "task_id,domain";
    for (std::int32_t p = 0; p < kNumPlanners; ++p) labels << ",p" << p;
    labels << '\n';
    for (const ManifestEntry& e : manifest.entries) {
        labels << e.task_id << ',' << e.domain;
        for (std::int32_t p = 0; p < kNumPlanners; ++p) labels << ',' << e.labels.runtimes[p];
        labels << '\n';
        std::ofstream g(dir / "graphs" / (e.task_id + ".psg"));
        if (!g) throw Error("write_benchmark: cannot write graph for " + e.task_id);
        g << serialize_graph(e.graph);
    }
    std::ofstream out(dir / "labels.csv");
    if (!out) throw Error("write_benchmark: cannot write labels.csv");
    out << labels.str();
}

}  // namespace plansel::synth
