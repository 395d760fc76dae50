// planner-selection pipeline CLI: dataset statistics, feature/label
// correlation, GNN training and evaluation, cross-validated experiments,
// embedding extraction and the embeddings->boosting hybrid.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "plansel/common.hpp"
#include "plansel/dataset.hpp"
#include "plansel/gbdt.hpp"
#include "plansel/gnn.hpp"
#include "plansel/pipeline.hpp"

namespace ps = plansel;
using nlohmann::ordered_json;

namespace {

struct CommonArgs {
    std::string data_dir;
    std::string repr = "grounded";
    std::vector<std::string> models = {"gcn"};
    std::string task = "time";
    std::string features = "type";
    std::string split = "random";
    std::string metric = "solves";
    std::string splits_file;
    std::string out_file;
    std::int32_t folds = 10;
    std::int32_t repeats = 10;
    std::int32_t epochs = 100;
    std::int32_t hidden = 100;
    std::int32_t layers = 2;
    std::int32_t heads = 4;
    std::int32_t batch = 16;
    std::int32_t degree_cap = 32;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    bool skip_diverged = false;
};

void add_data_flags(CLI::App* cmd, CommonArgs& a) {
    cmd->add_option("--data", a.data_dir, "dataset directory (labels.csv + graphs/)")->required();
    cmd->add_option("--repr", a.repr, "grounded or lifted");
}

void add_feature_flags(CLI::App* cmd, CommonArgs& a) {
    cmd->add_option("--features", a.features, "type, type+indeg, type+inoutdeg or type+neigh");
    cmd->add_option("--degree-cap", a.degree_cap, "degree one-hot bucket count");
}

void add_train_flags(CLI::App* cmd, CommonArgs& a) {
    cmd->add_option("--epochs", a.epochs, "training epochs");
    cmd->add_option("--hidden", a.hidden, "hidden width");
    cmd->add_option("--layers", a.layers, "message-passing layers");
    cmd->add_option("--heads", a.heads, "attention heads (gat)");
    cmd->add_option("--batch", a.batch, "graphs per optimizer step");
    cmd->add_option("--lr", a.lr, "learning rate");
    cmd->add_option("--seed", a.seed, "master seed");
}

void add_experiment_flags(CLI::App* cmd, CommonArgs& a) {
    cmd->add_option("--split", a.split, "random or domain");
    cmd->add_option("--folds", a.folds, "cross-validation folds");
    cmd->add_option("--repeats", a.repeats, "experiment repetitions");
    cmd->add_option("--splits", a.splits_file, "ingest a provided split file");
    cmd->add_option("--metric", a.metric, "solves or matches_best");
    cmd->add_flag("--skip-diverged", a.skip_diverged, "skip runs whose training diverges");
}

ps::SplitMode split_from_string(const std::string& s) {
    if (s == "random") return ps::SplitMode::random;
    if (s == "domain") return ps::SplitMode::domain_preserving;
    throw ps::Error("unknown split '" + s + "' (expected random or domain)");
}

ps::pipeline::ExperimentSpec build_spec(const CommonArgs& a, const ps::DatasetManifest& manifest) {
    ps::pipeline::ExperimentSpec spec;
    spec.representation = ps::representation_from_string(a.repr);
    spec.models.clear();
    for (const std::string& m : a.models) spec.models.push_back(ps::gnn::layer_kind_from_string(m));
    spec.task = ps::gnn::task_kind_from_string(a.task);
    spec.features = ps::FeatureConfig::parse(a.features);
    spec.features.degree_cap = a.degree_cap;
    spec.split_mode = split_from_string(a.split);
    spec.folds = a.folds;
    spec.repeats = a.repeats;
    spec.master_seed = a.seed;
    spec.metric = ps::pipeline::metric_from_string(a.metric);
    spec.model_template.hidden_dim = a.hidden;
    spec.model_template.num_layers = a.layers;
    spec.model_template.gat_heads = a.heads;
    spec.train.epochs = a.epochs;
    spec.train.lr = a.lr;
    spec.train.batch_size = a.batch;
    spec.skip_diverged = a.skip_diverged;
    if (!a.splits_file.empty())
        spec.provided_folds = ps::load_split_file(a.splits_file, manifest.task_ids());
    return spec;
}

void write_output(const std::string& out_file, const std::string& payload) {
    if (out_file.empty()) {
        std::cout << payload;
        return;
    }
    std::ofstream out(out_file);
    if (!out) throw ps::Error("cannot open " + out_file + " for writing");
    out << payload;
}

void emit_report(const ps::pipeline::EvaluationReport& report, const std::string& out_file) {
    write_output(out_file, ps::pipeline::report_to_json(report).dump(2) + "\n");
    std::fprintf(stderr, "%s: mean %.4f std %.4f over %zu runs (%.1f s)\n", report.metric.c_str(),
                 report.mean, report.stddev, report.runs.size(), report.wall_seconds);
}

int run(int argc, char** argv) {
    CLI::App app{"online planner selection with GNNs and boosted trees"};
    app.require_subcommand(1);
    CommonArgs a;

    auto* stats = app.add_subcommand("stats", "dataset statistics bundle");
    add_data_flags(stats, a);
    add_feature_flags(stats, a);
    stats->add_option("--out", a.out_file, "output JSON path");

    auto* correlate = app.add_subcommand("correlate", "feature/label correlation matrix");
    add_data_flags(correlate, a);
    add_feature_flags(correlate, a);
    correlate->add_option("--out", a.out_file, "output JSON path");

    auto* train = app.add_subcommand("train", "train one GNN on the full dataset");
    add_data_flags(train, a);
    add_feature_flags(train, a);
    add_train_flags(train, a);
    train->add_option("--model", a.models, "gcn, ggnn, gat or gin")->expected(1);
    train->add_option("--task", a.task, "time, binary or multiclass");
    std::string history_file;
    train->add_option("--history", history_file, "write per-epoch loss CSV");
    train->add_option("--out", a.out_file, "checkpoint path")->required();

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    add_data_flags(eval, a);
    add_feature_flags(eval, a);
    eval->add_option("--model", a.models, "gcn, ggnn, gat or gin")->expected(1);
    eval->add_option("--task", a.task, "time, binary or multiclass");
    eval->add_option("--hidden", a.hidden, "hidden width");
    eval->add_option("--layers", a.layers, "message-passing layers");
    eval->add_option("--heads", a.heads, "attention heads (gat)");
    eval->add_option("--metric", a.metric, "solves or matches_best");
    std::string model_file;
    eval->add_option("--model-file", model_file, "checkpoint to load")->required();
    eval->add_option("--splits", a.splits_file, "restrict to a fold's test side");
    std::int32_t eval_fold = 0;
    eval->add_option("--fold", eval_fold, "fold index within --splits");
    eval->add_option("--out", a.out_file, "output JSON path");

    auto* experiment = app.add_subcommand("experiment", "cross-validated GNN experiment");
    add_data_flags(experiment, a);
    add_feature_flags(experiment, a);
    add_train_flags(experiment, a);
    add_experiment_flags(experiment, a);
    experiment->add_option("--model", a.models, "gcn, ggnn, gat or gin")->expected(1);
    experiment->add_option("--task", a.task, "time or binary");
    experiment->add_option("--out", a.out_file, "report JSON path");

    auto* embed = app.add_subcommand("embed", "train embedders and dump graph embeddings");
    add_data_flags(embed, a);
    add_feature_flags(embed, a);
    add_train_flags(embed, a);
    embed->add_option("--model", a.models, "embedder models, repeatable")->take_all();
    embed->add_option("--out", a.out_file, "embeddings CSV path")->required();

    auto* boost = app.add_subcommand("boost", "GNN embeddings -> boosted-tree selection");
    add_data_flags(boost, a);
    add_feature_flags(boost, a);
    add_train_flags(boost, a);
    add_experiment_flags(boost, a);
    boost->add_option("--model", a.models, "embedder models, repeatable")->take_all();
    boost->add_option("--task", a.task, "time, binary or multiclass");
    ps::gbdt::BoostConfig boost_defaults;
    boost->add_option("--rounds", boost_defaults.rounds, "boosting rounds");
    boost->add_option("--max-depth", boost_defaults.max_depth, "tree depth limit");
    boost->add_option("--boost-lr", boost_defaults.learning_rate, "shrinkage");
    boost->add_option("--lambda", boost_defaults.lambda, "leaf weight L2");
    boost->add_option("--gamma", boost_defaults.gamma, "per-leaf penalty");
    boost->add_option("--patience", boost_defaults.patience, "early-stopping patience");
    boost->add_option("--out", a.out_file, "report JSON path");

    CLI11_PARSE(app, argc, argv);

    const ps::Representation repr = ps::representation_from_string(a.repr);
    const ps::NodeTypeVocab vocab = ps::NodeTypeVocab::standard(repr);
    const ps::DatasetManifest manifest = ps::load_manifest(a.data_dir, repr);

    if (stats->parsed()) {
        ps::FeatureConfig fc = ps::FeatureConfig::parse(a.features);
        fc.degree_cap = a.degree_cap;
        write_output(a.out_file, ps::pipeline::report_stats(manifest, vocab, fc).dump(2) + "\n");
        return 0;
    }
    if (correlate->parsed()) {
        ps::FeatureConfig fc = ps::FeatureConfig::parse(a.features);
        fc.degree_cap = a.degree_cap;
        const auto cm = ps::feature_label_correlation(manifest, vocab, fc);
        write_output(a.out_file, ps::pipeline::correlation_to_json(cm).dump(2) + "\n");
        return 0;
    }
    if (train->parsed()) {
        ps::pipeline::ExperimentSpec spec = build_spec(a, manifest);
        const auto data = ps::pipeline::prepare_tasks(manifest, vocab, spec.features);
        ps::gnn::ModelConfig mc = spec.model_template;
        mc.kind = spec.models[0];
        mc.task = spec.task;
        ps::gnn::GnnModel model = ps::gnn::build_model(mc, data.feature_dim, a.seed);
        std::vector<ps::gnn::TrainItem> items;
        for (const auto& t : data.tasks) {
            ps::gnn::TrainItem item;
            item.topo = &t.topo;
            item.features = t.features;
            item.target = ps::ad::Tensor::from_matrix(ps::gnn::task_targets(t.entry->labels, spec.task));
            items.push_back(std::move(item));
        }
        ps::gnn::TrainConfig tc = spec.train;
        tc.seed = a.seed;
        const auto result = ps::gnn::train_model(model, items, tc);
        ps::gnn::save_model(model, a.out_file);
        if (!history_file.empty()) {
            std::ofstream hist(history_file);
            if (!hist) throw ps::Error("cannot open " + history_file);
            hist << "epoch,loss\n";
            hist.precision(17);
            for (std::size_t e = 0; e < result.epoch_loss.size(); ++e)
                hist << e << ',' << result.epoch_loss[e] << '\n';
        }
        std::fprintf(stderr, "trained %s (%s) for %d epochs; final loss %.6g\n",
                     ps::gnn::to_string(mc.kind), ps::gnn::to_string(mc.task), tc.epochs,
                     result.epoch_loss.empty() ? 0.0 : result.epoch_loss.back());
        return 0;
    }
    if (eval->parsed()) {
        ps::FeatureConfig fc = ps::FeatureConfig::parse(a.features);
        fc.degree_cap = a.degree_cap;
        const auto data = ps::pipeline::prepare_tasks(manifest, vocab, fc);
        ps::gnn::ModelConfig mc;
        mc.kind = ps::gnn::layer_kind_from_string(a.models[0]);
        mc.task = ps::gnn::task_kind_from_string(a.task);
        mc.hidden_dim = a.hidden;
        mc.num_layers = a.layers;
        mc.gat_heads = a.heads;
        const ps::gnn::GnnModel model = ps::gnn::load_model(mc, data.feature_dim, model_file);
        std::vector<std::size_t> rows;
        if (!a.splits_file.empty()) {
            const auto folds = ps::load_split_file(a.splits_file, manifest.task_ids());
            if (eval_fold < 0 || static_cast<std::size_t>(eval_fold) >= folds.size())
                throw ps::Error("eval: fold index out of range");
            for (const std::string& id : folds[eval_fold].test_ids)
                rows.push_back(data.index.at(id));
        } else {
            for (std::size_t i = 0; i < data.tasks.size(); ++i) rows.push_back(i);
        }
        std::vector<std::int32_t> selections;
        std::vector<const ps::RuntimeLabelSet*> labels;
        for (std::size_t i : rows) {
            ps::ad::Tape tape;
            const auto pred = ps::gnn::model_forward(tape, model, data.tasks[i].topo,
                                                     data.tasks[i].features);
            selections.push_back(
                ps::pipeline::select_planner(std::span(pred.data(), pred.size()), mc.task));
            labels.push_back(&data.tasks[i].entry->labels);
        }
        ordered_json j;
        j["metric"] = a.metric;
        j["tasks"] = rows.size();
        j["accuracy"] = ps::pipeline::selection_accuracy(
            selections, labels, ps::pipeline::metric_from_string(a.metric));
        write_output(a.out_file, j.dump(2) + "\n");
        return 0;
    }
    if (experiment->parsed()) {
        const auto spec = build_spec(a, manifest);
        emit_report(ps::pipeline::run_experiment(spec, manifest), a.out_file);
        return 0;
    }
    if (embed->parsed()) {
        ps::pipeline::ExperimentSpec spec = build_spec(a, manifest);
        const auto data = ps::pipeline::prepare_tasks(manifest, vocab, spec.features);
        std::vector<ps::gnn::GnnModel> embedders;
        for (std::size_t mi = 0; mi < spec.models.size(); ++mi) {
            ps::gnn::ModelConfig mc = spec.model_template;
            mc.kind = spec.models[mi];
            mc.task = ps::gnn::TaskKind::time;
            ps::gnn::GnnModel model =
                ps::gnn::build_model(mc, data.feature_dim, a.seed + 7919ULL * mi);
            std::vector<ps::gnn::TrainItem> items;
            for (const auto& t : data.tasks) {
                ps::gnn::TrainItem item;
                item.topo = &t.topo;
                item.features = t.features;
                item.target = ps::ad::Tensor::from_matrix(
                    ps::gnn::task_targets(t.entry->labels, ps::gnn::TaskKind::time));
                items.push_back(std::move(item));
            }
            ps::gnn::TrainConfig tc = spec.train;
            tc.seed = a.seed + 7919ULL * mi;
            ps::gnn::train_model(model, items, tc);
            embedders.push_back(std::move(model));
        }
        std::ofstream out(a.out_file);
        if (!out) throw ps::Error("cannot open " + a.out_file);
        out.precision(17);
        const std::size_t width = embedders.size() * static_cast<std::size_t>(a.hidden);
        out << "task_id,domain";
        for (std::size_t j = 0; j < width; ++j) out << ",e" << j;
        out << '\n';
        for (const auto& t : data.tasks) {
            out << t.entry->task_id << ',' << t.entry->domain;
            for (const auto& model : embedders) {
                const ps::Matrix emb =
                    ps::gnn::extract_embedding(model, t.topo, t.features.to_matrix());
                for (std::size_t j = 0; j < emb.cols; ++j) out << ',' << emb.at(0, j);
            }
            out << '\n';
        }
        std::fprintf(stderr, "wrote %zu embeddings of width %zu\n", data.tasks.size(), width);
        return 0;
    }
    if (boost->parsed()) {
        ps::pipeline::ExperimentSpec spec = build_spec(a, manifest);
        spec.boost = boost_defaults;
        emit_report(ps::pipeline::embed_and_boost(spec, manifest), a.out_file);
        return 0;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        ordered_json err;
        err["error"]["message"] = e.what();
        std::cerr << err.dump() << std::endl;
        return 1;
    }
}
