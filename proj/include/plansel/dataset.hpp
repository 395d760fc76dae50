#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "plansel/graph.hpp"
#include "plansel/matrix.hpp"

namespace plansel {

inline constexpr std::int32_t kNumPlanners = 17;
inline constexpr double kTimeoutSeconds = 1800.0;
inline constexpr double kSentinelRuntime = 10000.0;

// Per-task portfolio runtimes. Each entry is either a solve time <= 1800 s or
// exactly the 10000 sentinel.
struct RuntimeLabelSet {
    std::string task_id;
    std::string domain;
    std::array<double, kNumPlanners> runtimes{};
};

struct ManifestEntry {
    std::string task_id;
    std::string domain;
    std::filesystem::path graph_path;
    PlanningGraph graph;
    RuntimeLabelSet labels;
};

struct DatasetManifest {
    Representation representation = Representation::grounded;
    std::vector<ManifestEntry> entries;

    std::vector<std::string> task_ids() const;
    const ManifestEntry& by_id(const std::string& task_id) const;
};

enum class SplitMode { random, domain_preserving, ingested };

const char* to_string(SplitMode m);

struct FoldSpec {
    std::int32_t fold_index = 0;
    std::vector<std::string> train_ids;
    std::vector<std::string> test_ids;
    SplitMode mode = SplitMode::random;
    std::uint64_t seed = 0;
};

struct CorrelationMatrix {
    std::vector<std::string> names;  // feature scalars first, then time/solvable labels
    Matrix r;
    std::vector<std::uint8_t> degenerate;  // zero variance across the dataset
};

struct BestPlanner {
    std::int32_t index = 0;
    bool no_solver = false;  // every runtime hit the sentinel
};

// --- graph files -------------------------------------------------------------
// Text, line-oriented: "PSG1 <representation> <task_id> <domain>", then
// "<num_nodes> <num_edges>", then the node types on one line, then one
// "src dst" pair per line.

PlanningGraph parse_graph_file(const std::string& text, const std::string& origin);
PlanningGraph load_graph_file(const std::filesystem::path& path);
std::string serialize_graph(const PlanningGraph& g);

// --- label files ---------------------------------------------------------------
// CSV with header task_id,domain,p0,...,p16. Runtimes must lie in [0,1800] or
// be exactly 10000.

std::vector<RuntimeLabelSet> parse_labels(const std::string& text, const std::string& origin);
std::vector<RuntimeLabelSet> load_label_file(const std::filesystem::path& path);

// Loads <dir>/labels.csv plus <dir>/graphs/<task_id>.psg for every row.
DatasetManifest load_manifest(const std::filesystem::path& dir, Representation repr);

// --- folds ----------------------------------------------------------------------

// Random mode deals shuffled ids into k near-equal folds (sizes differ by at
// most one). Domain mode assigns whole domains greedily to the smallest fold.
// Deterministic given seed.
std::vector<FoldSpec> make_folds(const DatasetManifest& manifest, SplitMode mode, std::int32_t k,
                                 std::uint64_t seed);

// Split file: one line per fold, "fold <i> test <id> <id> ...". Train is the
// complement within the manifest, so ingested folds need not partition the ids.
std::vector<FoldSpec> parse_split_file(const std::string& text,
                                       const std::vector<std::string>& all_ids);
std::vector<FoldSpec> load_split_file(const std::filesystem::path& path,
                                      const std::vector<std::string>& all_ids);
std::string serialize_splits(const std::vector<FoldSpec>& folds);

// --- label encodings ---------------------------------------------------------------

std::array<std::uint8_t, kNumPlanners> derive_binary_labels(const RuntimeLabelSet& labels);
BestPlanner derive_best_planner(const RuntimeLabelSet& labels);

// --- correlation ---------------------------------------------------------------------

// Per-graph scalar summaries of the configured feature blocks, correlated
// (Pearson) against the mean-runtime and mean-solvable labels, plus all
// pairwise feature/label correlations.
CorrelationMatrix feature_label_correlation(const DatasetManifest& manifest,
                                            const NodeTypeVocab& vocab,
                                            const FeatureConfig& config);

}  // namespace plansel
