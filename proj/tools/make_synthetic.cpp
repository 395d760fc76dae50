// Generates a synthetic planner-selection dataset in the on-disk layout the
// CLI consumes (labels.csv + graphs/*.psg). Repo utility, not part of the
// library surface.
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "plansel/common.hpp"
#include "plansel/synthetic.hpp"

int main(int argc, char** argv) {
    CLI::App app{"synthetic planner-selection benchmark generator"};
    std::string out_dir;
    std::string repr = "grounded";
    plansel::synth::SyntheticConfig config;
    app.add_option("--out", out_dir, "output directory")->required();
    app.add_option("--graphs", config.num_graphs, "number of graphs");
    app.add_option("--min-nodes", config.min_nodes, "minimum nodes per graph");
    app.add_option("--max-nodes", config.max_nodes, "maximum nodes per graph");
    app.add_option("--domains", config.num_domains, "number of synthetic domains");
    app.add_option("--repr", repr, "grounded or lifted");
    app.add_option("--seed", config.seed, "generator seed");
    CLI11_PARSE(app, argc, argv);

    try {
        config.representation = plansel::representation_from_string(repr);
        const auto manifest = plansel::synth::make_benchmark(config);
        plansel::synth::write_benchmark(manifest, out_dir);
        std::printf("wrote %zu graphs to %s\n", manifest.entries.size(), out_dir.c_str());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
