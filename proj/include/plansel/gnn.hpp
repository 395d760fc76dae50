#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "plansel/checkpoint.hpp"
#include "plansel/dataset.hpp"
#include "plansel/graph.hpp"
#include "plansel/tensor.hpp"

namespace plansel::gnn {

enum class LayerKind { gcn, ggnn, gat, gin };
enum class TaskKind { time, binary, multiclass, embed };
enum class ReadoutKind { mean, sum };

const char* to_string(LayerKind k);
const char* to_string(TaskKind t);
LayerKind layer_kind_from_string(const std::string& s);
TaskKind task_kind_from_string(const std::string& s);

// Preprocessed message-passing index lists for one graph. Self-loops and the
// symmetrized edge set live here, not in the stored graph.
struct Topology {
    std::int32_t num_nodes = 0;
    std::vector<std::int32_t> src, dst;          // directed edges u -> v
    std::vector<std::int32_t> rev_src, rev_dst;  // reversed (gathers out-neighbors)
    std::vector<std::int32_t> att_src, att_dst;  // in-edges plus self-loops
    std::vector<std::int32_t> sym_src, sym_dst;  // symmetrized plus self-loops
    std::vector<double> sym_coeff;               // 1/sqrt(deg~(u) deg~(v))

    static Topology build(const PlanningGraph& g);
};

struct GcnParams {
    ad::Tensor weight;
};
struct GgnnParams {
    ad::Tensor w_in, w_out, b_msg;
    ad::Tensor w_z, u_z, b_z;
    ad::Tensor w_r, u_r, b_r;
    ad::Tensor w_h, u_h, b_h;
};
struct GatParams {
    std::vector<ad::Tensor> weight;    // per head, in x out
    std::vector<ad::Tensor> attn_dst;  // per head, out x 1
    std::vector<ad::Tensor> attn_src;  // per head, out x 1
};
struct GinParams {
    ad::Tensor eps;  // 1x1, initialized 0
    ad::Tensor w1, b1, w2, b2;
};

struct Layer {
    LayerKind kind = LayerKind::gcn;
    std::int32_t in_dim = 0;
    std::int32_t out_dim = 0;
    std::variant<GcnParams, GgnnParams, GatParams, GinParams> params;
};

struct ModelConfig {
    LayerKind kind = LayerKind::gcn;
    TaskKind task = TaskKind::time;
    std::int32_t num_layers = 2;
    std::int32_t hidden_dim = 100;
    std::int32_t gat_heads = 4;
    ReadoutKind readout = ReadoutKind::mean;
    double leaky_slope = 0.2;
    bool final_activation = true;
};

// Stacked message-passing layers, a pooled readout and (except for embed) a
// linear head onto the 17 planners. GGNN preserves width, so it gets a linear
// input projection from the feature width to the hidden width.
struct GnnModel {
    ModelConfig config;
    std::int32_t input_dim = 0;
    ad::Tensor input_proj;  // defined only for GGNN
    std::vector<Layer> layers;
    ad::Tensor head_w, head_b;  // undefined when task == embed

    std::vector<ad::Tensor> parameters() const;
    std::vector<NamedParam> named_parameters() const;
};

GnnModel build_model(const ModelConfig& config, std::int32_t input_dim, std::uint64_t seed);

void save_model(const GnnModel& model, const std::filesystem::path& path);
// Rebuilds from config and overwrites every parameter from the checkpoint;
// names and shapes must match exactly.
GnnModel load_model(const ModelConfig& config, std::int32_t input_dim,
                    const std::filesystem::path& path);

ad::Tensor layer_forward(ad::Tape& tape, const Layer& layer, const ModelConfig& config,
                         const Topology& topo, const ad::Tensor& h);
ad::Tensor readout(ad::Tape& tape, const ad::Tensor& h, ReadoutKind kind);

// Full forward: 1x17 predictions, or the 1xhidden pooled embedding for embed.
ad::Tensor model_forward(ad::Tape& tape, const GnnModel& model, const Topology& topo,
                         const ad::Tensor& features);
// Forward stopping at readout regardless of the model's own task.
ad::Tensor model_embed(ad::Tape& tape, const GnnModel& model, const Topology& topo,
                       const ad::Tensor& features);

// --- training -------------------------------------------------------------

struct TrainConfig {
    std::int32_t epochs = 100;
    double lr = 1e-3;
    std::int32_t batch_size = 16;
    std::uint64_t seed = 0;
};

struct TrainItem {
    const Topology* topo = nullptr;
    ad::Tensor features;  // constant
    ad::Tensor target;    // constant 1x17
};

struct TrainResult {
    std::vector<double> epoch_loss;
};

// 1x17 training target for one task: raw runtimes (time, sentinel included),
// solvability bits (binary), or the one-hot best planner (multiclass).
Matrix task_targets(const RuntimeLabelSet& labels, TaskKind task);

// Adam + per-task loss (MSE for time, BCE otherwise), batches averaged,
// deterministic given the seed. Throws on a non-finite loss.
TrainResult train_model(GnnModel& model, std::vector<TrainItem>& items, const TrainConfig& config);

Matrix extract_embedding(const GnnModel& model, const Topology& topo, const FeatureMatrix& features);

}  // namespace plansel::gnn
