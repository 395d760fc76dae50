#include "plansel/graph.hpp"

#include <algorithm>

#include "plansel/common.hpp"

namespace plansel {

const char* to_string(Representation r) {
    return r == Representation::grounded ? "grounded" : "lifted";
}

Representation representation_from_string(const std::string& s) {
    if (s == "grounded") return Representation::grounded;
    if (s == "lifted") return Representation::lifted;
    throw Error("unknown representation '" + s + "' (expected grounded or lifted)");
}

NodeTypeVocab NodeTypeVocab::standard(Representation r) {
    NodeTypeVocab v;
    v.representation = r;
    if (r == Representation::grounded) {
        v.names = {"variable", "value", "action", "precondition", "effect", "goal"};
    } else {
        v.names = {"constant",  "object",   "predicate", "function", "action",
                   "parameter", "precond",  "effect",    "condition", "axiom",
                   "goal",      "type",     "operator",  "literal",  "schema"};
    }
    return v;
}

const char* to_string(FeatureBlock b) {
    switch (b) {
        case FeatureBlock::node_type: return "node_type";
        case FeatureBlock::in_degree: return "in_degree";
        case FeatureBlock::out_degree: return "out_degree";
        case FeatureBlock::neighbor_type_in: return "neighbor_type_in";
        case FeatureBlock::neighbor_type_out: return "neighbor_type_out";
    }
    return "?";
}

void FeatureConfig::validate() const {
    if (degree_cap < 2) throw Error("FeatureConfig: degree_cap must be >= 2");
    bool has_type = false;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (blocks[i] == FeatureBlock::node_type) has_type = true;
        for (std::size_t j = i + 1; j < blocks.size(); ++j)
            if (blocks[i] == blocks[j])
                throw Error(std::string("FeatureConfig: duplicate block ") + to_string(blocks[i]));
    }
    if (!has_type) throw Error("FeatureConfig: node_type block is required");
}

FeatureConfig FeatureConfig::parse(const std::string& spec) {
    FeatureConfig c;
    if (spec == "type") {
        c.blocks = {FeatureBlock::node_type};
    } else if (spec == "type+indeg") {
        c.blocks = {FeatureBlock::node_type, FeatureBlock::in_degree};
    } else if (spec == "type+inoutdeg") {
        c.blocks = {FeatureBlock::node_type, FeatureBlock::in_degree, FeatureBlock::out_degree};
    } else if (spec == "type+neigh") {
        c.blocks = {FeatureBlock::node_type, FeatureBlock::neighbor_type_in,
                    FeatureBlock::neighbor_type_out};
    } else {
        throw Error("unknown feature spec '" + spec +
                    "' (expected type, type+indeg, type+inoutdeg or type+neigh)");
    }
    return c;
}

std::string FeatureConfig::spelling() const {
    const auto has = [&](FeatureBlock b) {
        return std::find(blocks.begin(), blocks.end(), b) != blocks.end();
    };
    if (has(FeatureBlock::in_degree) && has(FeatureBlock::out_degree)) return "type+inoutdeg";
    if (has(FeatureBlock::in_degree)) return "type+indeg";
    if (has(FeatureBlock::neighbor_type_in) || has(FeatureBlock::neighbor_type_out))
        return "type+neigh";
    return "type";
}

PlanningGraph make_planning_graph(std::string task_id, std::string domain, Representation repr,
                                  std::int32_t num_nodes, std::vector<std::int32_t> node_types,
                                  std::vector<std::pair<std::int32_t, std::int32_t>> edges) {
    if (num_nodes < 0) throw Error("graph '" + task_id + "': negative node count");
    if (static_cast<std::int32_t>(node_types.size()) != num_nodes)
        throw Error("graph '" + task_id + "': " + std::to_string(node_types.size()) +
                    " node types for " + std::to_string(num_nodes) + " nodes");
    const std::int32_t vocab_size = repr == Representation::grounded ? 6 : 15;
    for (std::int32_t v = 0; v < num_nodes; ++v) {
        if (node_types[v] < 0 || node_types[v] >= vocab_size)
            throw Error("graph '" + task_id + "': node " + std::to_string(v) + " has type " +
                        std::to_string(node_types[v]) + " outside the " + to_string(repr) +
                        " vocabulary of size " + std::to_string(vocab_size));
    }
    for (const auto& [src, dst] : edges) {
        if (src < 0 || src >= num_nodes || dst < 0 || dst >= num_nodes)
            throw Error("graph '" + task_id + "': edge (" + std::to_string(src) + "," +
                        std::to_string(dst) + ") has an endpoint outside [0," +
                        std::to_string(num_nodes) + ")");
    }
    std::erase_if(edges, [](const auto& e) { return e.first == e.second; });
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

    PlanningGraph g;
    g.task_id = std::move(task_id);
    g.domain = std::move(domain);
    g.representation = repr;
    g.num_nodes = num_nodes;
    g.node_types = std::move(node_types);
    g.edges = std::move(edges);
    return g;
}

std::vector<std::int32_t> in_degrees(const PlanningGraph& g) {
    std::vector<std::int32_t> deg(g.num_nodes, 0);
    for (const auto& [src, dst] : g.edges) deg[dst] += 1;
    return deg;
}

std::vector<std::int32_t> out_degrees(const PlanningGraph& g) {
    std::vector<std::int32_t> deg(g.num_nodes, 0);
    for (const auto& [src, dst] : g.edges) deg[src] += 1;
    return deg;
}

FeatureMatrix one_hot_node_types(const PlanningGraph& g, const NodeTypeVocab& vocab) {
    if (vocab.representation != g.representation)
        throw Error("one_hot_node_types: vocabulary representation does not match graph");
    FeatureMatrix m(g.num_nodes, vocab.size());
    for (std::int32_t v = 0; v < g.num_nodes; ++v) {
        if (g.node_types[v] >= vocab.size())
            throw Error("one_hot_node_types: node " + std::to_string(v) + " type out of range");
        m.at(v, g.node_types[v]) = 1.0;
    }
    return m;
}

FeatureMatrix degree_features(const PlanningGraph& g, DegreeMode mode, std::int32_t cap) {
    if (cap < 2) throw Error("degree_features: cap must be >= 2");
    const auto ind = in_degrees(g);
    const std::int32_t width = mode == DegreeMode::in ? cap : 2 * cap;
    FeatureMatrix m(g.num_nodes, width);
    for (std::int32_t v = 0; v < g.num_nodes; ++v)
        m.at(v, std::min(ind[v], cap - 1)) = 1.0;
    if (mode == DegreeMode::in_out) {
        const auto outd = out_degrees(g);
        for (std::int32_t v = 0; v < g.num_nodes; ++v)
            m.at(v, cap + std::min(outd[v], cap - 1)) = 1.0;
    }
    return m;
}

FeatureMatrix neighbor_type_features(const PlanningGraph& g, const NodeTypeVocab& vocab,
                                     NeighborDirection direction) {
    if (vocab.representation != g.representation)
        throw Error("neighbor_type_features: vocabulary representation does not match graph");
    const std::int32_t w = vocab.size();
    const bool both = direction == NeighborDirection::both;
    FeatureMatrix m(g.num_nodes, both ? 2 * w : w);
    for (const auto& [src, dst] : g.edges) {
        // src's type feeds dst's in-counts; dst's type feeds src's out-counts
        if (direction == NeighborDirection::in) {
            m.at(dst, g.node_types[src]) += 1.0;
        } else if (direction == NeighborDirection::out) {
            m.at(src, g.node_types[dst]) += 1.0;
        } else {
            m.at(dst, g.node_types[src]) += 1.0;
            m.at(src, w + g.node_types[dst]) += 1.0;
        }
    }
    return m;
}

std::int32_t feature_width(const FeatureConfig& config, const NodeTypeVocab& vocab) {
    std::int32_t w = 0;
    for (FeatureBlock b : config.blocks) {
        switch (b) {
            case FeatureBlock::node_type: w += vocab.size(); break;
            case FeatureBlock::in_degree:
            case FeatureBlock::out_degree: w += config.degree_cap; break;
            case FeatureBlock::neighbor_type_in:
            case FeatureBlock::neighbor_type_out: w += vocab.size(); break;
        }
    }
    return w;
}

FeatureMatrix assemble_features(const PlanningGraph& g, const NodeTypeVocab& vocab,
                                const FeatureConfig& config) {
    config.validate();
    FeatureMatrix out(g.num_nodes, feature_width(config, vocab));
    std::int32_t col = 0;
    const auto paste = [&](const FeatureMatrix& block) {
        for (std::int32_t v = 0; v < g.num_nodes; ++v)
            for (std::size_t j = 0; j < block.cols; ++j) out.at(v, col + j) = block.at(v, j);
        col += static_cast<std::int32_t>(block.cols);
    };
    for (FeatureBlock b : config.blocks) {
        switch (b) {
            case FeatureBlock::node_type:
                paste(one_hot_node_types(g, vocab));
                break;
            case FeatureBlock::in_degree:
                paste(degree_features(g, DegreeMode::in, config.degree_cap));
                break;
            case FeatureBlock::out_degree: {
                // out-only block: slice the out half of the in_out form
                FeatureMatrix full = degree_features(g, DegreeMode::in_out, config.degree_cap);
                FeatureMatrix outblock(g.num_nodes, config.degree_cap);
                for (std::int32_t v = 0; v < g.num_nodes; ++v)
                    for (std::int32_t j = 0; j < config.degree_cap; ++j)
                        outblock.at(v, j) = full.at(v, config.degree_cap + j);
                paste(outblock);
                break;
            }
            case FeatureBlock::neighbor_type_in:
                paste(neighbor_type_features(g, vocab, NeighborDirection::in));
                break;
            case FeatureBlock::neighbor_type_out:
                paste(neighbor_type_features(g, vocab, NeighborDirection::out));
                break;
        }
    }
    return out;
}

GraphStats graph_stats(const PlanningGraph& g) {
    GraphStats s;
    s.num_nodes = g.num_nodes;
    s.num_edges = static_cast<std::int64_t>(g.edges.size());
    s.avg_in_degree =
        g.num_nodes == 0 ? 0.0 : static_cast<double>(s.num_edges) / static_cast<double>(g.num_nodes);
    const auto ind = in_degrees(g);
    const auto outd = out_degrees(g);
    std::map<std::int32_t, std::pair<double, std::int64_t>> acc;  // type -> (degree sum, count)
    for (std::int32_t v = 0; v < g.num_nodes; ++v) {
        auto& [sum, count] = acc[g.node_types[v]];
        sum += static_cast<double>(ind[v] + outd[v]);
        count += 1;
    }
    for (const auto& [type, sc] : acc)
        s.per_type_avg_degree[type] = sc.first / static_cast<double>(sc.second);
    return s;
}

PlanningGraph permute_nodes(const PlanningGraph& g, const std::vector<std::int32_t>& perm) {
    if (static_cast<std::int32_t>(perm.size()) != g.num_nodes)
        throw Error("permute_nodes: permutation size mismatch");
    std::vector<std::int32_t> types(g.num_nodes);
    for (std::int32_t v = 0; v < g.num_nodes; ++v) types[perm[v]] = g.node_types[v];
    std::vector<std::pair<std::int32_t, std::int32_t>> edges;
    edges.reserve(g.edges.size());
    for (const auto& [src, dst] : g.edges) edges.emplace_back(perm[src], perm[dst]);
    return make_planning_graph(g.task_id, g.domain, g.representation, g.num_nodes, std::move(types),
                               std::move(edges));
}

}  // namespace plansel
