#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "plansel/dataset.hpp"
#include "plansel/gbdt.hpp"
#include "plansel/gnn.hpp"

namespace plansel::pipeline {

enum class AccuracyMetric { solves, matches_best };

const char* to_string(AccuracyMetric m);
AccuracyMetric metric_from_string(const std::string& s);

struct ExperimentSpec {
    Representation representation = Representation::grounded;
    std::vector<gnn::LayerKind> models = {gnn::LayerKind::gcn};
    gnn::TaskKind task = gnn::TaskKind::time;
    FeatureConfig features;
    SplitMode split_mode = SplitMode::random;
    std::int32_t folds = 10;
    std::int32_t repeats = 10;
    std::uint64_t master_seed = 0;
    gnn::ModelConfig model_template;  // hidden width, layer count, readout, heads
    gnn::TrainConfig train;
    gbdt::BoostConfig boost;  // hybrid runs only
    AccuracyMetric metric = AccuracyMetric::solves;
    std::optional<std::vector<FoldSpec>> provided_folds;
    bool skip_diverged = false;

    void validate(bool hybrid) const;
};

struct RunRecord {
    std::int32_t repeat = 0;
    std::int32_t fold = 0;
    double accuracy = 0.0;
};

struct EvaluationReport {
    std::string metric;
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation over runs
    std::vector<RunRecord> runs;
    nlohmann::ordered_json config;
    double wall_seconds = 0.0;  // logged to the console, never serialized
};

// JSON form of the report: {metric, mean, std, runs, config}; byte-identical
// for equal master seeds.
nlohmann::ordered_json report_to_json(const EvaluationReport& report);

// Per-task state shared across folds and repeats.
struct PreparedTask {
    const ManifestEntry* entry = nullptr;
    gnn::Topology topo;
    ad::Tensor features;
};

struct PreparedData {
    std::vector<PreparedTask> tasks;
    std::unordered_map<std::string, std::size_t> index;
    std::int32_t feature_dim = 0;
};

PreparedData prepare_tasks(const DatasetManifest& manifest, const NodeTypeVocab& vocab,
                           const FeatureConfig& config);

// argmin for time predictions, argmax otherwise; ties to the lowest index.
std::int32_t select_planner(std::span<const double> predictions, gnn::TaskKind task);

double selection_accuracy(const std::vector<std::int32_t>& selections,
                          const std::vector<const RuntimeLabelSet*>& labels, AccuracyMetric metric);

// Cross-validated GNN experiment (tasks time and binary; multiclass is the
// hybrid's job and is rejected here).
EvaluationReport run_experiment(const ExperimentSpec& spec, const DatasetManifest& manifest);

// Hybrid: per fold, train the named GNNs on the fold's training set, extract
// pooled embeddings for every task, boost on the training embeddings (with a
// 10% early-stopping holdout) and select on the test set.
EvaluationReport embed_and_boost(const ExperimentSpec& spec, const DatasetManifest& manifest);

// Per-graph sizes, per-type average degrees and the feature/label correlation
// matrix, as a plot-ready JSON bundle.
nlohmann::ordered_json report_stats(const DatasetManifest& manifest, const NodeTypeVocab& vocab,
                                    const FeatureConfig& config);

nlohmann::ordered_json correlation_to_json(const CorrelationMatrix& cm);

}  // namespace plansel::pipeline
