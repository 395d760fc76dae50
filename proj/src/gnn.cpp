#include "plansel/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "plansel/common.hpp"

namespace plansel::gnn {

using ad::Tape;
using ad::Tensor;

const char* to_string(LayerKind k) {
    switch (k) {
        case LayerKind::gcn: return "gcn";
        case LayerKind::ggnn: return "ggnn";
        case LayerKind::gat: return "gat";
        case LayerKind::gin: return "gin";
    }
    return "?";
}

const char* to_string(TaskKind t) {
    switch (t) {
        case TaskKind::time: return "time";
        case TaskKind::binary: return "binary";
        case TaskKind::multiclass: return "multiclass";
        case TaskKind::embed: return "embed";
    }
    return "?";
}

LayerKind layer_kind_from_string(const std::string& s) {
    if (s == "gcn") return LayerKind::gcn;
    if (s == "ggnn") return LayerKind::ggnn;
    if (s == "gat") return LayerKind::gat;
    if (s == "gin") return LayerKind::gin;
    throw Error("unknown model '" + s + "' (expected gcn, ggnn, gat or gin)");
}

TaskKind task_kind_from_string(const std::string& s) {
    if (s == "time") return TaskKind::time;
    if (s == "binary") return TaskKind::binary;
    if (s == "multiclass") return TaskKind::multiclass;
    if (s == "embed") return TaskKind::embed;
    throw Error("unknown task '" + s + "' (expected time, binary or multiclass)");
}

// --- topology ---------------------------------------------------------------

Topology Topology::build(const PlanningGraph& g) {
    Topology t;
    t.num_nodes = g.num_nodes;
    t.src.reserve(g.edges.size());
    t.dst.reserve(g.edges.size());
    for (const auto& [u, v] : g.edges) {
        t.src.push_back(u);
        t.dst.push_back(v);
    }
    t.rev_src = t.dst;
    t.rev_dst = t.src;

    // in-edges plus one self-loop per node, grouped by destination
    t.att_src.reserve(t.src.size() + g.num_nodes);
    t.att_dst.reserve(t.src.size() + g.num_nodes);
    for (std::size_t e = 0; e < t.src.size(); ++e) {
        t.att_src.push_back(t.src[e]);
        t.att_dst.push_back(t.dst[e]);
    }
    for (std::int32_t v = 0; v < g.num_nodes; ++v) {
        t.att_src.push_back(v);
        t.att_dst.push_back(v);
    }

    // symmetrized edge set plus self-loops with symmetric normalization
    std::set<std::pair<std::int32_t, std::int32_t>> sym;
    for (const auto& [u, v] : g.edges) {
        sym.emplace(u, v);
        sym.emplace(v, u);
    }
    std::vector<double> deg(g.num_nodes, 1.0);  // self-loop counts once
    for (const auto& [u, v] : sym) deg[v] += 1.0;
    for (std::int32_t v = 0; v < g.num_nodes; ++v) sym.emplace(v, v);
    t.sym_src.reserve(sym.size());
    t.sym_dst.reserve(sym.size());
    t.sym_coeff.reserve(sym.size());
    for (const auto& [u, v] : sym) {
        t.sym_src.push_back(u);
        t.sym_dst.push_back(v);
        t.sym_coeff.push_back(1.0 / std::sqrt(deg[u] * deg[v]));
    }
    return t;
}

// --- parameter construction ------------------------------------------------------

namespace {

Tensor glorot(std::int32_t rows, std::int32_t cols, std::mt19937_64& rng) {
    Tensor t(rows, cols, true);
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = dist(rng);
    return t;
}

Tensor zeros_param(std::int32_t rows, std::int32_t cols) { return Tensor(rows, cols, true); }

Layer build_layer(LayerKind kind, std::int32_t in_dim, std::int32_t out_dim, std::int32_t heads,
                  std::mt19937_64& rng) {
    Layer layer;
    layer.kind = kind;
    layer.in_dim = in_dim;
    layer.out_dim = out_dim;
    switch (kind) {
        case LayerKind::gcn:
            layer.params = GcnParams{glorot(in_dim, out_dim, rng)};
            break;
        case LayerKind::ggnn: {
            if (in_dim != out_dim) throw Error("ggnn layer requires in_dim == out_dim");
            GgnnParams p;
            p.w_in = glorot(in_dim, out_dim, rng);
            p.w_out = glorot(in_dim, out_dim, rng);
            p.b_msg = zeros_param(1, out_dim);
            p.w_z = glorot(out_dim, out_dim, rng);
            p.u_z = glorot(out_dim, out_dim, rng);
            p.b_z = zeros_param(1, out_dim);
            p.w_r = glorot(out_dim, out_dim, rng);
            p.u_r = glorot(out_dim, out_dim, rng);
            p.b_r = zeros_param(1, out_dim);
            p.w_h = glorot(out_dim, out_dim, rng);
            p.u_h = glorot(out_dim, out_dim, rng);
            p.b_h = zeros_param(1, out_dim);
            layer.params = std::move(p);
            break;
        }
        case LayerKind::gat: {
            GatParams p;
            for (std::int32_t k = 0; k < heads; ++k) {
                p.weight.push_back(glorot(in_dim, out_dim, rng));
                p.attn_dst.push_back(glorot(out_dim, 1, rng));
                p.attn_src.push_back(glorot(out_dim, 1, rng));
            }
            layer.params = std::move(p);
            break;
        }
        case LayerKind::gin: {
            GinParams p;
            p.eps = zeros_param(1, 1);
            p.w1 = glorot(in_dim, out_dim, rng);
            p.b1 = zeros_param(1, out_dim);
            p.w2 = glorot(out_dim, out_dim, rng);
            p.b2 = zeros_param(1, out_dim);
            layer.params = std::move(p);
            break;
        }
    }
    return layer;
}

}  // namespace

GnnModel build_model(const ModelConfig& config, std::int32_t input_dim, std::uint64_t seed) {
    if (config.num_layers < 1) throw Error("build_model: at least one layer required");
    if (config.hidden_dim < 1) throw Error("build_model: hidden_dim must be positive");
    if (config.kind == LayerKind::gat && config.gat_heads < 1)
        throw Error("build_model: gat needs at least one head");
    std::mt19937_64 rng(seed);
    GnnModel m;
    m.config = config;
    m.input_dim = input_dim;
    std::int32_t width = input_dim;
    if (config.kind == LayerKind::ggnn) {
        m.input_proj = glorot(input_dim, config.hidden_dim, rng);
        width = config.hidden_dim;
    }
    for (std::int32_t i = 0; i < config.num_layers; ++i) {
        m.layers.push_back(build_layer(config.kind, width, config.hidden_dim, config.gat_heads, rng));
        width = config.hidden_dim;
    }
    if (config.task != TaskKind::embed) {
        m.head_w = glorot(config.hidden_dim, kNumPlanners, rng);
        m.head_b = zeros_param(1, kNumPlanners);
    }
    return m;
}

std::vector<Tensor> GnnModel::parameters() const {
    std::vector<Tensor> out;
    for (const NamedParam& p : named_parameters()) out.push_back(p.tensor);
    return out;
}

std::vector<NamedParam> GnnModel::named_parameters() const {
    std::vector<NamedParam> out;
    if (input_proj.defined()) out.push_back({"input_proj", input_proj});
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const std::string prefix = "layers." + std::to_string(i) + ".";
        const Layer& layer = layers[i];
        if (const auto* p = std::get_if<GcnParams>(&layer.params)) {
            out.push_back({prefix + "w", p->weight});
        } else if (const auto* p = std::get_if<GgnnParams>(&layer.params)) {
            out.push_back({prefix + "w_in", p->w_in});
            out.push_back({prefix + "w_out", p->w_out});
            out.push_back({prefix + "b_msg", p->b_msg});
            out.push_back({prefix + "w_z", p->w_z});
            out.push_back({prefix + "u_z", p->u_z});
            out.push_back({prefix + "b_z", p->b_z});
            out.push_back({prefix + "w_r", p->w_r});
            out.push_back({prefix + "u_r", p->u_r});
            out.push_back({prefix + "b_r", p->b_r});
            out.push_back({prefix + "w_h", p->w_h});
            out.push_back({prefix + "u_h", p->u_h});
            out.push_back({prefix + "b_h", p->b_h});
        } else if (const auto* p = std::get_if<GatParams>(&layer.params)) {
            for (std::size_t k = 0; k < p->weight.size(); ++k) {
                const std::string h = prefix + "head" + std::to_string(k) + ".";
                out.push_back({h + "w", p->weight[k]});
                out.push_back({h + "a_dst", p->attn_dst[k]});
                out.push_back({h + "a_src", p->attn_src[k]});
            }
        } else if (const auto* p = std::get_if<GinParams>(&layer.params)) {
            out.push_back({prefix + "eps", p->eps});
            out.push_back({prefix + "w1", p->w1});
            out.push_back({prefix + "b1", p->b1});
            out.push_back({prefix + "w2", p->w2});
            out.push_back({prefix + "b2", p->b2});
        }
    }
    if (head_w.defined()) {
        out.push_back({"head.w", head_w});
        out.push_back({"head.b", head_b});
    }
    return out;
}

void save_model(const GnnModel& model, const std::filesystem::path& path) {
    save_checkpoint(path, model.named_parameters());
}

GnnModel load_model(const ModelConfig& config, std::int32_t input_dim,
                    const std::filesystem::path& path) {
    GnnModel model = build_model(config, input_dim, 0);
    const auto stored = load_checkpoint(path);
    auto params = model.named_parameters();
    if (stored.size() != params.size())
        throw Error("load_model: checkpoint has " + std::to_string(stored.size()) +
                    " parameters, model expects " + std::to_string(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (stored[i].name != params[i].name)
            throw Error("load_model: parameter '" + stored[i].name + "' where '" + params[i].name +
                        "' was expected");
        if (stored[i].tensor.rows() != params[i].tensor.rows() ||
            stored[i].tensor.cols() != params[i].tensor.cols())
            throw Error("load_model: shape mismatch for '" + stored[i].name + "'");
        std::copy(stored[i].tensor.data(), stored[i].tensor.data() + stored[i].tensor.size(),
                  params[i].tensor.data());
    }
    return model;
}

// --- layer forwards ------------------------------------------------------------

namespace {

Tensor gcn_forward(Tape& tape, const GcnParams& p, const Topology& topo, const Tensor& h,
                   bool activation) {
    Tensor hw = matmul(tape, h, p.weight);
    Tensor msg = gather_rows(tape, hw, topo.sym_src);
    msg = scale_rows(tape, msg, topo.sym_coeff);
    Tensor agg = segment_sum(tape, msg, topo.sym_dst, topo.num_nodes);
    return activation ? relu(tape, agg) : agg;
}

Tensor ggnn_forward(Tape& tape, const GgnnParams& p, const Topology& topo, const Tensor& h) {
    Tensor m_in = segment_sum(tape, gather_rows(tape, matmul(tape, h, p.w_in), topo.src), topo.dst,
                              topo.num_nodes);
    Tensor m_out = segment_sum(tape, gather_rows(tape, matmul(tape, h, p.w_out), topo.rev_src),
                               topo.rev_dst, topo.num_nodes);
    Tensor m = add_rowvec(tape, add(tape, m_in, m_out), p.b_msg);

    Tensor z = sigmoid(tape, add_rowvec(tape, add(tape, matmul(tape, m, p.w_z), matmul(tape, h, p.u_z)),
                                        p.b_z));
    Tensor r = sigmoid(tape, add_rowvec(tape, add(tape, matmul(tape, m, p.w_r), matmul(tape, h, p.u_r)),
                                        p.b_r));
    Tensor cand = tanh_act(
        tape,
        add_rowvec(tape, add(tape, matmul(tape, m, p.w_h), matmul(tape, mul(tape, r, h), p.u_h)),
                   p.b_h));
    Tensor ones(h.rows(), h.cols());
    std::fill(ones.data(), ones.data() + ones.size(), 1.0);
    Tensor keep = sub(tape, ones, z);
    return add(tape, mul(tape, keep, cand), mul(tape, z, h));
}

Tensor gat_forward(Tape& tape, const GatParams& p, const Topology& topo, const Tensor& h,
                   double slope, bool activation) {
    Tensor sum;
    const std::size_t heads = p.weight.size();
    for (std::size_t k = 0; k < heads; ++k) {
        Tensor wh = matmul(tape, h, p.weight[k]);
        Tensor e_dst = matmul(tape, wh, p.attn_dst[k]);  // N x 1
        Tensor e_src = matmul(tape, wh, p.attn_src[k]);  // N x 1
        Tensor e = add(tape, gather_rows(tape, e_dst, topo.att_dst),
                       gather_rows(tape, e_src, topo.att_src));
        e = leaky_relu(tape, e, slope);
        Tensor alpha = segment_softmax(tape, e, topo.att_dst, topo.num_nodes);
        Tensor msg = mul_colvec(tape, gather_rows(tape, wh, topo.att_src), alpha);
        Tensor head_out = segment_sum(tape, msg, topo.att_dst, topo.num_nodes);
        sum = k == 0 ? head_out : add(tape, sum, head_out);
    }
    Tensor avg = scale(tape, sum, 1.0 / static_cast<double>(heads));
    return activation ? relu(tape, avg) : avg;
}

Tensor gin_forward(Tape& tape, const GinParams& p, const Topology& topo, const Tensor& h) {
    Tensor agg = segment_sum(tape, gather_rows(tape, h, topo.src), topo.dst, topo.num_nodes);
    Tensor x = add(tape, add(tape, h, mul_scalar(tape, h, p.eps)), agg);  // (1+eps) h + sum
    Tensor hidden = relu(tape, add_rowvec(tape, matmul(tape, x, p.w1), p.b1));
    return add_rowvec(tape, matmul(tape, hidden, p.w2), p.b2);
}

}  // namespace

Tensor layer_forward(Tape& tape, const Layer& layer, const ModelConfig& config, const Topology& topo,
                     const Tensor& h) {
    if (h.rows() != static_cast<std::size_t>(topo.num_nodes))
        throw Error("layer_forward: feature rows do not match node count");
    if (h.cols() != static_cast<std::size_t>(layer.in_dim))
        throw Error("layer_forward: feature width " + std::to_string(h.cols()) +
                    " does not match layer input " + std::to_string(layer.in_dim));
    switch (layer.kind) {
        case LayerKind::gcn:
            return gcn_forward(tape, std::get<GcnParams>(layer.params), topo, h,
                               config.final_activation);
        case LayerKind::ggnn:
            return ggnn_forward(tape, std::get<GgnnParams>(layer.params), topo, h);
        case LayerKind::gat:
            return gat_forward(tape, std::get<GatParams>(layer.params), topo, h, config.leaky_slope,
                               config.final_activation);
        case LayerKind::gin:
            return gin_forward(tape, std::get<GinParams>(layer.params), topo, h);
    }
    throw Error("layer_forward: unreachable");
}

Tensor readout(Tape& tape, const Tensor& h, ReadoutKind kind) {
    if (h.rows() == 0) throw Error("readout: empty graph");
    return kind == ReadoutKind::mean ? reduce_mean_rows(tape, h) : reduce_sum_rows(tape, h);
}

Tensor model_embed(Tape& tape, const GnnModel& model, const Topology& topo, const Tensor& features) {
    Tensor h = features;
    if (model.input_proj.defined()) h = matmul(tape, h, model.input_proj);
    for (const Layer& layer : model.layers) h = layer_forward(tape, layer, model.config, topo, h);
    return readout(tape, h, model.config.readout);
}

Tensor model_forward(Tape& tape, const GnnModel& model, const Topology& topo,
                     const Tensor& features) {
    Tensor pooled = model_embed(tape, model, topo, features);
    if (model.config.task == TaskKind::embed) return pooled;
    return add_rowvec(tape, matmul(tape, pooled, model.head_w), model.head_b);
}

// --- training --------------------------------------------------------------------

Matrix task_targets(const RuntimeLabelSet& labels, TaskKind task) {
    Matrix m(1, kNumPlanners);
    switch (task) {
        case TaskKind::time:
            for (std::int32_t p = 0; p < kNumPlanners; ++p) m.at(0, p) = labels.runtimes[p];
            break;
        case TaskKind::binary: {
            const auto bits = derive_binary_labels(labels);
            for (std::int32_t p = 0; p < kNumPlanners; ++p) m.at(0, p) = bits[p];
            break;
        }
        case TaskKind::multiclass:
            m.at(0, derive_best_planner(labels).index) = 1.0;
            break;
        case TaskKind::embed:
            throw Error("task_targets: embed has no training target");
    }
    return m;
}

TrainResult train_model(GnnModel& model, std::vector<TrainItem>& items, const TrainConfig& config) {
    if (items.empty()) throw Error("train_model: no training items");
    if (config.batch_size < 1) throw Error("train_model: batch_size must be >= 1");
    if (model.config.task == TaskKind::embed)
        throw Error("train_model: embed models are extracted from trained ones, not trained directly");

    auto params = model.parameters();
    ad::AdamState adam;
    adam.lr = config.lr;
    std::mt19937_64 rng(config.seed);
    TrainResult result;

    std::vector<std::size_t> order(items.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::int32_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t stop = std::min(order.size(), start + config.batch_size);
            Tape tape;
            Tensor batch_loss;
            for (std::size_t i = start; i < stop; ++i) {
                TrainItem& item = items[order[i]];
                Tensor pred = model_forward(tape, model, *item.topo, item.features);
                Tensor loss = model.config.task == TaskKind::time
                                  ? loss_mse(tape, pred, item.target)
                                  : loss_bce_logits(tape, pred, item.target);
                batch_loss = batch_loss.defined() ? add(tape, batch_loss, loss) : loss;
            }
            batch_loss = scale(tape, batch_loss, 1.0 / static_cast<double>(stop - start));
            const double value = batch_loss.item();
            if (!std::isfinite(value))
                throw Error("train_model: non-finite loss at epoch " + std::to_string(epoch) +
                            ", batch starting at " + std::to_string(start));
            epoch_sum += value * static_cast<double>(stop - start);
            seen += stop - start;
            zero_grads(params);
            tape.backward(batch_loss);
            adam_step(params, adam);
        }
        result.epoch_loss.push_back(epoch_sum / static_cast<double>(seen));
    }
    return result;
}

Matrix extract_embedding(const GnnModel& model, const Topology& topo, const FeatureMatrix& features) {
    Tape tape;
    Tensor x = Tensor::from_matrix(features);
    Tensor pooled = model_embed(tape, model, topo, x);
    return pooled.to_matrix();
}

}  // namespace plansel::gnn
