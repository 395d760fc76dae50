#include "plansel/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "plansel/common.hpp"

namespace plansel::pipeline {

using nlohmann::ordered_json;

const char* to_string(AccuracyMetric m) {
    return m == AccuracyMetric::solves ? "solves" : "matches_best";
}

AccuracyMetric metric_from_string(const std::string& s) {
    if (s == "solves") return AccuracyMetric::solves;
    if (s == "matches_best") return AccuracyMetric::matches_best;
    throw Error("unknown metric '" + s + "' (expected solves or matches_best)");
}

void ExperimentSpec::validate(bool hybrid) const {
    features.validate();
    if (folds < 2 && !provided_folds) throw Error("experiment: folds must be >= 2");
    if (repeats < 1) throw Error("experiment: repeats must be >= 1");
    if (models.empty()) throw Error("experiment: at least one model required");
    if (!hybrid) {
        if (models.size() != 1)
            throw Error("experiment: multiple models are only supported for embedding runs");
        if (task == gnn::TaskKind::multiclass)
            throw Error(
                "experiment: the multiclass task needs the hybrid path "
                "(GNN embeddings -> boosted softmax); use the boost subcommand");
        if (task == gnn::TaskKind::embed)
            throw Error("experiment: embed is not a selection task");
    } else {
        if (task == gnn::TaskKind::embed) throw Error("boost: embed is not a selection task");
        boost.validate();
    }
}

// --- shared helpers -----------------------------------------------------------

PreparedData prepare_tasks(const DatasetManifest& manifest, const NodeTypeVocab& vocab,
                           const FeatureConfig& config) {
    config.validate();
    PreparedData data;
    data.feature_dim = feature_width(config, vocab);
    data.tasks.reserve(manifest.entries.size());
    for (const ManifestEntry& e : manifest.entries) {
        PreparedTask t;
        t.entry = &e;
        t.topo = gnn::Topology::build(e.graph);
        t.features = ad::Tensor::from_matrix(assemble_features(e.graph, vocab, config));
        data.index[e.task_id] = data.tasks.size();
        data.tasks.push_back(std::move(t));
    }
    return data;
}

std::int32_t select_planner(std::span<const double> predictions, gnn::TaskKind task) {
    if (predictions.size() != static_cast<std::size_t>(kNumPlanners))
        throw Error("select_planner: expected " + std::to_string(kNumPlanners) + " predictions");
    for (double p : predictions)
        if (!std::isfinite(p)) throw Error("select_planner: non-finite prediction");
    if (task == gnn::TaskKind::time)
        return static_cast<std::int32_t>(
            std::min_element(predictions.begin(), predictions.end()) - predictions.begin());
    return static_cast<std::int32_t>(std::max_element(predictions.begin(), predictions.end()) -
                                     predictions.begin());
}

double selection_accuracy(const std::vector<std::int32_t>& selections,
                          const std::vector<const RuntimeLabelSet*>& labels,
                          AccuracyMetric metric) {
    if (selections.size() != labels.size())
        throw Error("selection_accuracy: selection/label count mismatch");
    if (selections.empty()) throw Error("selection_accuracy: empty evaluation set");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < selections.size(); ++i) {
        if (metric == AccuracyMetric::solves) {
            if (labels[i]->runtimes[selections[i]] <= kTimeoutSeconds) hits += 1;
        } else {
            if (selections[i] == derive_best_planner(*labels[i]).index) hits += 1;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(selections.size());
}

namespace {

std::vector<FoldSpec> resolve_folds(const ExperimentSpec& spec, const DatasetManifest& manifest) {
    if (spec.provided_folds) return *spec.provided_folds;
    return make_folds(manifest, spec.split_mode, spec.folds, spec.master_seed);
}

std::uint64_t run_seed(std::uint64_t master, std::int32_t repeat, std::int32_t fold) {
    // repeat seeds are master+repeat; fold mixes in on top
    return (master + static_cast<std::uint64_t>(repeat)) * 1000003ULL +
           static_cast<std::uint64_t>(fold);
}

void finalize_report(EvaluationReport& report) {
    const double n = static_cast<double>(report.runs.size());
    double sum = 0.0;
    for (const RunRecord& r : report.runs) sum += r.accuracy;
    report.mean = report.runs.empty() ? 0.0 : sum / n;
    if (report.runs.size() >= 2) {
        double ss = 0.0;
        for (const RunRecord& r : report.runs) {
            const double d = r.accuracy - report.mean;
            ss += d * d;
        }
        report.stddev = std::sqrt(ss / (n - 1.0));
    }
}

ordered_json spec_to_json(const ExperimentSpec& spec, bool hybrid) {
    ordered_json j;
    j["representation"] = to_string(spec.representation);
    ordered_json models = ordered_json::array();
    for (gnn::LayerKind k : spec.models) models.push_back(gnn::to_string(k));
    j["models"] = models;
    j["task"] = gnn::to_string(spec.task);
    j["features"] = spec.features.spelling();
    j["degree_cap"] = spec.features.degree_cap;
    j["split"] = to_string(spec.split_mode);
    j["folds"] = spec.provided_folds ? static_cast<std::int32_t>(spec.provided_folds->size())
                                     : spec.folds;
    j["repeats"] = spec.repeats;
    j["seed"] = spec.master_seed;
    j["epochs"] = spec.train.epochs;
    j["batch_size"] = spec.train.batch_size;
    j["lr"] = spec.train.lr;
    j["hidden"] = spec.model_template.hidden_dim;
    j["layers"] = spec.model_template.num_layers;
    j["heads"] = spec.model_template.gat_heads;
    j["readout"] = spec.model_template.readout == gnn::ReadoutKind::mean ? "mean" : "sum";
    if (hybrid) {
        ordered_json b;
        b["rounds"] = spec.boost.rounds;
        b["max_depth"] = spec.boost.max_depth;
        b["learning_rate"] = spec.boost.learning_rate;
        b["lambda"] = spec.boost.lambda;
        b["gamma"] = spec.boost.gamma;
        b["patience"] = spec.boost.patience;
        j["boost"] = b;
    }
    j["metric"] = to_string(spec.metric);
    return j;
}

std::vector<gnn::TrainItem> make_train_items(const PreparedData& data,
                                             const std::vector<std::string>& ids,
                                             gnn::TaskKind task) {
    std::vector<gnn::TrainItem> items;
    items.reserve(ids.size());
    for (const std::string& id : ids) {
        const PreparedTask& t = data.tasks[data.index.at(id)];
        gnn::TrainItem item;
        item.topo = &t.topo;
        item.features = t.features;
        item.target = ad::Tensor::from_matrix(gnn::task_targets(t.entry->labels, task));
        items.push_back(std::move(item));
    }
    return items;
}

}  // namespace

// --- GNN-only experiment ----------------------------------------------------------

EvaluationReport run_experiment(const ExperimentSpec& spec, const DatasetManifest& manifest) {
    spec.validate(false);
    if (manifest.representation != spec.representation)
        throw Error("experiment: manifest representation does not match the spec");
    const auto t0 = std::chrono::steady_clock::now();

    const NodeTypeVocab vocab = NodeTypeVocab::standard(spec.representation);
    const PreparedData data = prepare_tasks(manifest, vocab, spec.features);
    const std::vector<FoldSpec> folds = resolve_folds(spec, manifest);

    EvaluationReport report;
    report.metric = to_string(spec.metric);
    report.config = spec_to_json(spec, false);

    gnn::ModelConfig mc = spec.model_template;
    mc.kind = spec.models[0];
    mc.task = spec.task;

    for (std::int32_t repeat = 0; repeat < spec.repeats; ++repeat) {
        for (const FoldSpec& fold : folds) {
            const std::uint64_t seed = run_seed(spec.master_seed, repeat, fold.fold_index);
            try {
                gnn::GnnModel model = gnn::build_model(mc, data.feature_dim, seed);
                auto items = make_train_items(data, fold.train_ids, spec.task);
                gnn::TrainConfig tc = spec.train;
                tc.seed = seed;
                gnn::train_model(model, items, tc);

                std::vector<std::int32_t> selections;
                std::vector<const RuntimeLabelSet*> labels;
                for (const std::string& id : fold.test_ids) {
                    const PreparedTask& t = data.tasks[data.index.at(id)];
                    ad::Tape tape;
                    ad::Tensor pred = gnn::model_forward(tape, model, t.topo, t.features);
                    selections.push_back(
                        select_planner(std::span(pred.data(), pred.size()), spec.task));
                    labels.push_back(&t.entry->labels);
                }
                report.runs.push_back(
                    {repeat, fold.fold_index,
                     selection_accuracy(selections, labels, spec.metric)});
            } catch (const Error& e) {
                if (spec.skip_diverged) continue;
                throw Error("repeat " + std::to_string(repeat) + " fold " +
                            std::to_string(fold.fold_index) + ": " + e.what());
            }
        }
    }
    finalize_report(report);
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

// --- hybrid: embeddings -> boosting ---------------------------------------------------

namespace {

struct FoldEmbeddings {
    Matrix all;  // one row per manifest task, width 100 * model count
};

FoldEmbeddings train_embedders_and_extract(const ExperimentSpec& spec, const PreparedData& data,
                                           const std::vector<std::string>& train_ids,
                                           std::uint64_t seed) {
    const std::int32_t width =
        spec.model_template.hidden_dim * static_cast<std::int32_t>(spec.models.size());
    FoldEmbeddings out;
    out.all = Matrix(data.tasks.size(), width);
    std::int32_t col0 = 0;
    for (std::size_t mi = 0; mi < spec.models.size(); ++mi) {
        gnn::ModelConfig mc = spec.model_template;
        mc.kind = spec.models[mi];
        // embedders are trained on the time objective, then read at the readout
        mc.task = gnn::TaskKind::time;
        const std::uint64_t mseed = seed + 7919ULL * static_cast<std::uint64_t>(mi);
        gnn::GnnModel model = gnn::build_model(mc, data.feature_dim, mseed);
        auto items = make_train_items(data, train_ids, gnn::TaskKind::time);
        gnn::TrainConfig tc = spec.train;
        tc.seed = mseed;
        gnn::train_model(model, items, tc);
        for (std::size_t ti = 0; ti < data.tasks.size(); ++ti) {
            const PreparedTask& t = data.tasks[ti];
            const Matrix emb = gnn::extract_embedding(model, t.topo, t.features.to_matrix());
            for (std::size_t j = 0; j < emb.cols; ++j) out.all.at(ti, col0 + j) = emb.at(0, j);
        }
        col0 += spec.model_template.hidden_dim;
    }
    return out;
}

Matrix rows_subset(const Matrix& m, const std::vector<std::size_t>& rows) {
    Matrix out(rows.size(), m.cols);
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy(m.row(rows[i]), m.row(rows[i]) + m.cols, out.row(i));
    return out;
}

}  // namespace

EvaluationReport embed_and_boost(const ExperimentSpec& spec, const DatasetManifest& manifest) {
    spec.validate(true);
    if (manifest.representation != spec.representation)
        throw Error("boost: manifest representation does not match the spec");
    const auto t0 = std::chrono::steady_clock::now();

    const NodeTypeVocab vocab = NodeTypeVocab::standard(spec.representation);
    const PreparedData data = prepare_tasks(manifest, vocab, spec.features);
    const std::vector<FoldSpec> folds = resolve_folds(spec, manifest);

    EvaluationReport report;
    report.metric = to_string(spec.metric);
    report.config = spec_to_json(spec, true);

    for (std::int32_t repeat = 0; repeat < spec.repeats; ++repeat) {
        for (const FoldSpec& fold : folds) {
            const std::uint64_t seed = run_seed(spec.master_seed, repeat, fold.fold_index);
            try {
                const FoldEmbeddings emb =
                    train_embedders_and_extract(spec, data, fold.train_ids, seed);

                // 10% of the fold's training rows become the early-stopping holdout
                std::vector<std::size_t> train_rows;
                for (const std::string& id : fold.train_ids) train_rows.push_back(data.index.at(id));
                std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
                std::shuffle(train_rows.begin(), train_rows.end(), rng);
                const std::size_t holdout = std::max<std::size_t>(1, train_rows.size() / 10);
                std::vector<std::size_t> valid_rows(train_rows.end() - holdout, train_rows.end());
                train_rows.resize(train_rows.size() - holdout);

                const Matrix x_train = rows_subset(emb.all, train_rows);
                const Matrix x_valid = rows_subset(emb.all, valid_rows);

                std::vector<std::size_t> test_rows;
                for (const std::string& id : fold.test_ids) test_rows.push_back(data.index.at(id));
                const Matrix x_test = rows_subset(emb.all, test_rows);

                auto label_of = [&](std::size_t row) -> const RuntimeLabelSet& {
                    return data.tasks[row].entry->labels;
                };

                Matrix scores(test_rows.size(), kNumPlanners);
                gbdt::BoostConfig bc = spec.boost;
                if (spec.task == gnn::TaskKind::multiclass) {
                    bc.objective = gbdt::Objective::softmax;
                    bc.num_classes = kNumPlanners;
                    std::vector<double> y, yv;
                    for (std::size_t r : train_rows)
                        y.push_back(derive_best_planner(label_of(r)).index);
                    for (std::size_t r : valid_rows)
                        yv.push_back(derive_best_planner(label_of(r)).index);
                    const auto ensemble = gbdt::boost_fit(x_train, y, &x_valid, yv, bc);
                    scores = ensemble.predict(x_test);
                } else {
                    bc.objective = spec.task == gnn::TaskKind::time ? gbdt::Objective::squared
                                                                    : gbdt::Objective::logistic;
                    for (std::int32_t p = 0; p < kNumPlanners; ++p) {
                        std::vector<double> y, yv;
                        for (std::size_t r : train_rows)
                            y.push_back(spec.task == gnn::TaskKind::time
                                            ? label_of(r).runtimes[p]
                                            : derive_binary_labels(label_of(r))[p]);
                        for (std::size_t r : valid_rows)
                            yv.push_back(spec.task == gnn::TaskKind::time
                                             ? label_of(r).runtimes[p]
                                             : derive_binary_labels(label_of(r))[p]);
                        const auto ensemble = gbdt::boost_fit(x_train, y, &x_valid, yv, bc);
                        const Matrix pred = ensemble.predict(x_test);
                        for (std::size_t i = 0; i < test_rows.size(); ++i)
                            scores.at(i, p) = pred.at(i, 0);
                    }
                }

                std::vector<std::int32_t> selections;
                std::vector<const RuntimeLabelSet*> labels;
                for (std::size_t i = 0; i < test_rows.size(); ++i) {
                    selections.push_back(
                        select_planner(std::span(scores.row(i), kNumPlanners), spec.task));
                    labels.push_back(&label_of(test_rows[i]));
                }
                report.runs.push_back(
                    {repeat, fold.fold_index,
                     selection_accuracy(selections, labels, spec.metric)});
            } catch (const Error& e) {
                if (spec.skip_diverged) continue;
                throw Error("repeat " + std::to_string(repeat) + " fold " +
                            std::to_string(fold.fold_index) + ": " + e.what());
            }
        }
    }
    finalize_report(report);
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

// --- reports ---------------------------------------------------------------------

ordered_json report_to_json(const EvaluationReport& report) {
    ordered_json j;
    j["metric"] = report.metric;
    j["mean"] = report.mean;
    j["std"] = report.stddev;
    ordered_json runs = ordered_json::array();
    for (const RunRecord& r : report.runs) {
        ordered_json run;
        run["repeat"] = r.repeat;
        run["fold"] = r.fold;
        run["accuracy"] = r.accuracy;
        runs.push_back(run);
    }
    j["runs"] = runs;
    j["config"] = report.config;
    return j;
}

ordered_json correlation_to_json(const CorrelationMatrix& cm) {
    ordered_json j;
    j["names"] = cm.names;
    ordered_json rows = ordered_json::array();
    for (std::size_t i = 0; i < cm.r.rows; ++i) {
        ordered_json row = ordered_json::array();
        for (std::size_t k = 0; k < cm.r.cols; ++k) row.push_back(cm.r.at(i, k));
        rows.push_back(row);
    }
    j["matrix"] = rows;
    ordered_json deg = ordered_json::array();
    for (std::uint8_t d : cm.degenerate) deg.push_back(d != 0);
    j["degenerate"] = deg;
    return j;
}

ordered_json report_stats(const DatasetManifest& manifest, const NodeTypeVocab& vocab,
                          const FeatureConfig& config) {
    ordered_json j;
    j["representation"] = to_string(manifest.representation);
    ordered_json graphs = ordered_json::array();
    std::int64_t total_nodes = 0, total_edges = 0;
    std::map<std::int32_t, std::pair<double, std::int64_t>> type_acc;
    for (const ManifestEntry& e : manifest.entries) {
        const GraphStats s = graph_stats(e.graph);
        ordered_json row;
        row["task_id"] = e.task_id;
        row["domain"] = e.domain;
        row["nodes"] = s.num_nodes;
        row["edges"] = s.num_edges;
        row["avg_in_degree"] = s.avg_in_degree;
        graphs.push_back(row);
        total_nodes += s.num_nodes;
        total_edges += s.num_edges;
        const auto ind = in_degrees(e.graph);
        const auto outd = out_degrees(e.graph);
        for (std::int32_t v = 0; v < e.graph.num_nodes; ++v) {
            auto& [sum, count] = type_acc[e.graph.node_types[v]];
            sum += ind[v] + outd[v];
            count += 1;
        }
    }
    j["graphs"] = graphs;
    j["total_nodes"] = total_nodes;
    j["total_edges"] = total_edges;
    j["dataset_avg_in_degree"] =
        total_nodes ? static_cast<double>(total_edges) / static_cast<double>(total_nodes) : 0.0;
    j["dataset_avg_degree"] =
        total_nodes ? 2.0 * static_cast<double>(total_edges) / static_cast<double>(total_nodes) : 0.0;
    ordered_json per_type;
    for (const auto& [type, sc] : type_acc) {
        ordered_json row;
        row["type"] = type;
        row["name"] = type < vocab.size() ? vocab.names[type] : "?";
        row["avg_degree"] = sc.first / static_cast<double>(sc.second);
        per_type.push_back(row);
    }
    j["per_type_avg_degree"] = per_type;
    if (manifest.entries.size() >= 3)
        j["correlation"] = correlation_to_json(feature_label_correlation(manifest, vocab, config));
    return j;
}

}  // namespace plansel::pipeline
