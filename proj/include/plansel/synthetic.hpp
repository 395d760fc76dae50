#pragma once

#include <cstdint>
#include <filesystem>

#include "plansel/dataset.hpp"

namespace plansel::synth {

// Benchmark generator: random typed digraphs where the fastest planner is a
// deterministic function of the majority node type. Planners 0..2 form the
// live portfolio (fast / slow / timeout by type rotation), the rest always
// hit the sentinel.
struct SyntheticConfig {
    std::int32_t num_graphs = 300;
    std::int32_t min_nodes = 20;
    std::int32_t max_nodes = 60;
    double majority_fraction = 0.7;
    std::int32_t num_domains = 12;
    Representation representation = Representation::grounded;
    std::uint64_t seed = 7;
};

DatasetManifest make_benchmark(const SyntheticConfig& config);

// Writes <dir>/labels.csv and <dir>/graphs/<task>.psg so the CLI can run on it.
void write_benchmark(const DatasetManifest& manifest, const std::filesystem::path& dir);

}  // namespace plansel::synth
