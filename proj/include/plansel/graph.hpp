#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "plansel/matrix.hpp"

namespace plansel {

enum class Representation { grounded, lifted };

const char* to_string(Representation r);
Representation representation_from_string(const std::string& s);

// Directed typed graph for one planning task. Stored form is canonical:
// edges sorted by (src, dst), duplicates collapsed, self-loops dropped.
// Layers that need self-loops add them transiently.
struct PlanningGraph {
    std::string task_id;
    std::string domain;
    Representation representation = Representation::grounded;
    std::int32_t num_nodes = 0;
    std::vector<std::int32_t> node_types;
    std::vector<std::pair<std::int32_t, std::int32_t>> edges;
};

struct NodeTypeVocab {
    Representation representation = Representation::grounded;
    std::vector<std::string> names;

    std::int32_t size() const { return static_cast<std::int32_t>(names.size()); }
    static NodeTypeVocab standard(Representation r);  // 6 grounded / 15 lifted
};

enum class FeatureBlock { node_type, in_degree, out_degree, neighbor_type_in, neighbor_type_out };

const char* to_string(FeatureBlock b);

struct FeatureConfig {
    std::vector<FeatureBlock> blocks = {FeatureBlock::node_type};
    std::int32_t degree_cap = 32;

    void validate() const;  // node_type present, no duplicates, cap >= 2
    // Accepts the CLI spellings type, type+indeg, type+inoutdeg, type+neigh.
    static FeatureConfig parse(const std::string& spec);
    std::string spelling() const;
};

struct GraphStats {
    std::int64_t num_nodes = 0;
    std::int64_t num_edges = 0;
    double avg_in_degree = 0.0;
    std::map<std::int32_t, double> per_type_avg_degree;  // mean of in+out degree per type
};

using FeatureMatrix = Matrix;

// Validating constructor; throws Error naming the offending node or edge.
PlanningGraph make_planning_graph(std::string task_id, std::string domain, Representation repr,
                                  std::int32_t num_nodes, std::vector<std::int32_t> node_types,
                                  std::vector<std::pair<std::int32_t, std::int32_t>> edges);

std::vector<std::int32_t> in_degrees(const PlanningGraph& g);
std::vector<std::int32_t> out_degrees(const PlanningGraph& g);

FeatureMatrix one_hot_node_types(const PlanningGraph& g, const NodeTypeVocab& vocab);

enum class DegreeMode { in, in_out };
// One-hot degree buckets, bucket = min(degree, cap-1); in block first.
FeatureMatrix degree_features(const PlanningGraph& g, DegreeMode mode, std::int32_t cap);

enum class NeighborDirection { in, out, both };
// Count vector over neighbor types; both = in-counts then out-counts.
FeatureMatrix neighbor_type_features(const PlanningGraph& g, const NodeTypeVocab& vocab,
                                     NeighborDirection direction);

FeatureMatrix assemble_features(const PlanningGraph& g, const NodeTypeVocab& vocab,
                                const FeatureConfig& config);
std::int32_t feature_width(const FeatureConfig& config, const NodeTypeVocab& vocab);

GraphStats graph_stats(const PlanningGraph& g);

// Relabels node v as perm[v]; result is again canonical.
PlanningGraph permute_nodes(const PlanningGraph& g, const std::vector<std::int32_t>& perm);

}  // namespace plansel
