#include "plansel/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "plansel/common.hpp"

namespace plansel {

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream in(line);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

// strtod-style but strict: the whole token must be consumed
double parse_number(const std::string& tok, const std::string& origin, std::size_t line_no,
                    const char* what) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw Error(origin + ":" + std::to_string(line_no) + ": " + what + " '" + tok +
                    "' is not numeric");
    return value;
}

std::int64_t parse_int(const std::string& tok, const std::string& origin, std::size_t line_no,
                       const char* what) {
    std::int64_t value = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw Error(origin + ":" + std::to_string(line_no) + ": " + what + " '" + tok +
                    "' is not an integer");
    return value;
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::string cur;
    for (char c : text) {
        if (c == '\n') {
            if (!cur.empty() && cur.back() == '\r') cur.pop_back();
            lines.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) lines.push_back(cur);
    return lines;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

const char* to_string(SplitMode m) {
    switch (m) {
        case SplitMode::random: return "random";
        case SplitMode::domain_preserving: return "domain";
        case SplitMode::ingested: return "ingested";
    }
    return "?";
}

std::vector<std::string> DatasetManifest::task_ids() const {
    std::vector<std::string> ids;
    ids.reserve(entries.size());
    for (const auto& e : entries) ids.push_back(e.task_id);
    return ids;
}

const ManifestEntry& DatasetManifest::by_id(const std::string& task_id) const {
    for (const auto& e : entries)
        if (e.task_id == task_id) return e;
    throw Error("manifest has no task '" + task_id + "'");
}

// --- graph files -------------------------------------------------------------

PlanningGraph parse_graph_file(const std::string& text, const std::string& origin) {
    const auto lines = split_lines(text);
    if (lines.size() < 2) throw Error(origin + ": truncated graph file");

    const auto header = split_ws(lines[0]);
    if (header.size() != 4 || header[0] != "PSG1")
        throw Error(origin + ":1: expected 'PSG1 <representation> <task_id> <domain>'");
    const Representation repr = representation_from_string(header[1]);
    const std::string& task_id = header[2];
    const std::string& domain = header[3];

    const auto counts = split_ws(lines[1]);
    if (counts.size() != 2) throw Error(origin + ":2: expected '<num_nodes> <num_edges>'");
    const auto num_nodes = parse_int(counts[0], origin, 2, "node count");
    const auto num_edges = parse_int(counts[1], origin, 2, "edge count");
    if (num_nodes < 0 || num_edges < 0)
        throw Error(origin + ":2: counts must be non-negative");

    std::vector<std::int32_t> types;
    types.reserve(static_cast<std::size_t>(num_nodes));
    if (num_nodes > 0) {
        if (lines.size() < 3) throw Error(origin + ":3: missing node type line");
        for (const std::string& tok : split_ws(lines[2]))
            types.push_back(static_cast<std::int32_t>(parse_int(tok, origin, 3, "node type")));
        if (static_cast<std::int64_t>(types.size()) != num_nodes)
            throw Error(origin + ":3: " + std::to_string(types.size()) + " node types listed for " +
                        std::to_string(num_nodes) + " nodes");
    }

    const std::size_t edge_start = num_nodes > 0 ? 3 : 2;
    std::vector<std::pair<std::int32_t, std::int32_t>> edges;
    edges.reserve(static_cast<std::size_t>(num_edges));
    std::size_t edge_lines = 0;
    for (std::size_t i = edge_start; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto toks = split_ws(lines[i]);
        if (toks.size() != 2)
            throw Error(origin + ":" + std::to_string(i + 1) + ": expected 'src dst'");
        edges.emplace_back(static_cast<std::int32_t>(parse_int(toks[0], origin, i + 1, "edge src")),
                           static_cast<std::int32_t>(parse_int(toks[1], origin, i + 1, "edge dst")));
        edge_lines += 1;
    }
    if (static_cast<std::int64_t>(edge_lines) != num_edges)
        throw Error(origin + ": header declares " + std::to_string(num_edges) + " edges but " +
                    std::to_string(edge_lines) + " edge lines follow");

    try {
        return make_planning_graph(task_id, domain, repr, static_cast<std::int32_t>(num_nodes),
                                   std::move(types), std::move(edges));
    } catch (const Error& e) {
        throw Error(origin + ": " + e.what());
    }
}

PlanningGraph load_graph_file(const std::filesystem::path& path) {
    return parse_graph_file(read_file(path), path.string());
}

std::string serialize_graph(const PlanningGraph& g) {
    std::ostringstream out;
    out << "PSG1 " << to_string(g.representation) << ' ' << g.task_id << ' ' << g.domain << '\n';
    out << g.num_nodes << ' ' << g.edges.size() << '\n';
    if (g.num_nodes > 0) {
        for (std::int32_t v = 0; v < g.num_nodes; ++v) {
            if (v) out << ' ';
            out << g.node_types[v];
        }
        out << '\n';
    }
    for (const auto& [src, dst] : g.edges) out << src << ' ' << dst << '\n';
    return out.str();
}

// --- label files ---------------------------------------------------------------

std::vector<RuntimeLabelSet> parse_labels(const std::string& text, const std::string& origin) {
    const auto lines = split_lines(text);
    if (lines.empty()) throw Error(origin + ": empty label file");
    const auto header = split_csv(lines[0]);
    if (header.size() != 2 + kNumPlanners || header[0] != "task_id" || header[1] != "domain")
        throw Error(origin + ":1: expected header task_id,domain,p0,...,p16");

    std::vector<RuntimeLabelSet> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto cells = split_csv(lines[i]);
        if (cells.size() != 2 + kNumPlanners)
            throw Error(origin + ":" + std::to_string(i + 1) + ": expected " +
                        std::to_string(2 + kNumPlanners) + " columns, found " +
                        std::to_string(cells.size()));
        RuntimeLabelSet rec;
        rec.task_id = cells[0];
        rec.domain = cells[1];
        for (std::int32_t p = 0; p < kNumPlanners; ++p) {
            const double t = parse_number(cells[2 + p], origin, i + 1, "runtime");
            const bool solved_range = t >= 0.0 && t <= kTimeoutSeconds;
            if (!solved_range && t != kSentinelRuntime)
                throw Error(origin + ":" + std::to_string(i + 1) + ": runtime " + cells[2 + p] +
                            " for planner " + std::to_string(p) +
                            " is neither in [0,1800] nor the 10000 sentinel");
            rec.runtimes[p] = t;
        }
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<RuntimeLabelSet> load_label_file(const std::filesystem::path& path) {
    return parse_labels(read_file(path), path.string());
}

DatasetManifest load_manifest(const std::filesystem::path& dir, Representation repr) {
    DatasetManifest m;
    m.representation = repr;
    const auto labels = load_label_file(dir / "labels.csv");
    std::unordered_set<std::string> seen;
    for (const RuntimeLabelSet& rec : labels) {
        if (!seen.insert(rec.task_id).second)
            throw Error("manifest: duplicate task id '" + rec.task_id + "'");
        ManifestEntry e;
        e.task_id = rec.task_id;
        e.domain = rec.domain;
        e.graph_path = dir / "graphs" / (rec.task_id + ".psg");
        e.graph = load_graph_file(e.graph_path);
        if (e.graph.representation != repr)
            throw Error("manifest: graph " + e.graph_path.string() + " is " +
                        to_string(e.graph.representation) + ", expected " + to_string(repr));
        if (e.graph.task_id != rec.task_id)
            throw Error("manifest: graph file " + e.graph_path.string() + " names task '" +
                        e.graph.task_id + "'");
        e.labels = rec;
        m.entries.push_back(std::move(e));
    }
    if (m.entries.empty()) throw Error("manifest: no tasks in " + dir.string());
    return m;
}

// --- folds ----------------------------------------------------------------------

std::vector<FoldSpec> make_folds(const DatasetManifest& manifest, SplitMode mode, std::int32_t k,
                                 std::uint64_t seed) {
    if (k < 2) throw Error("make_folds: k must be >= 2");
    if (manifest.entries.empty()) throw Error("make_folds: empty manifest");
    if (mode == SplitMode::ingested)
        throw Error("make_folds: ingested splits come from parse_split_file");

    const std::vector<std::string> ids = manifest.task_ids();
    const std::size_t n = ids.size();
    if (static_cast<std::size_t>(k) > n) throw Error("make_folds: more folds than tasks");

    std::vector<std::vector<std::string>> test(k);
    std::mt19937_64 rng(seed);

    if (mode == SplitMode::random) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        const std::size_t base = n / static_cast<std::size_t>(k);
        const std::size_t extra = n % static_cast<std::size_t>(k);
        std::size_t pos = 0;
        for (std::int32_t f = 0; f < k; ++f) {
            const std::size_t take = base + (static_cast<std::size_t>(f) < extra ? 1 : 0);
            for (std::size_t j = 0; j < take; ++j) test[f].push_back(ids[order[pos++]]);
        }
    } else {
        std::unordered_map<std::string, std::vector<std::string>> by_domain;
        for (const auto& e : manifest.entries) by_domain[e.domain].push_back(e.task_id);
        if (by_domain.size() < static_cast<std::size_t>(k))
            throw Error("make_folds: domain-preserving split needs at least " + std::to_string(k) +
                        " domains; dataset has " + std::to_string(by_domain.size()));
        std::vector<std::string> domains;
        domains.reserve(by_domain.size());
        for (const auto& [d, _] : by_domain) domains.push_back(d);
        std::sort(domains.begin(), domains.end());
        std::shuffle(domains.begin(), domains.end(), rng);
        std::stable_sort(domains.begin(), domains.end(), [&](const auto& a, const auto& b) {
            return by_domain[a].size() > by_domain[b].size();
        });
        std::vector<std::size_t> load(k, 0);
        for (const std::string& d : domains) {
            const auto smallest =
                std::min_element(load.begin(), load.end()) - load.begin();
            for (const std::string& id : by_domain[d]) test[smallest].push_back(id);
            load[smallest] += by_domain[d].size();
        }
    }

    std::vector<FoldSpec> folds(k);
    for (std::int32_t f = 0; f < k; ++f) {
        folds[f].fold_index = f;
        folds[f].mode = mode;
        folds[f].seed = seed;
        folds[f].test_ids = std::move(test[f]);
        std::sort(folds[f].test_ids.begin(), folds[f].test_ids.end());
        std::set<std::string> test_set(folds[f].test_ids.begin(), folds[f].test_ids.end());
        for (const std::string& id : ids)
            if (!test_set.count(id)) folds[f].train_ids.push_back(id);
        std::sort(folds[f].train_ids.begin(), folds[f].train_ids.end());
    }
    return folds;
}

std::vector<FoldSpec> parse_split_file(const std::string& text,
                                       const std::vector<std::string>& all_ids) {
    const std::set<std::string> known(all_ids.begin(), all_ids.end());
    std::vector<FoldSpec> folds;
    const auto lines = split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto toks = split_ws(lines[i]);
        if (toks.size() < 3 || toks[0] != "fold" || toks[2] != "test")
            throw Error("splits:" + std::to_string(i + 1) + ": expected 'fold <i> test <id> ...'");
        FoldSpec fold;
        fold.fold_index = static_cast<std::int32_t>(parse_int(toks[1], "splits", i + 1, "fold index"));
        fold.mode = SplitMode::ingested;
        std::set<std::string> test_set;
        for (std::size_t j = 3; j < toks.size(); ++j) {
            if (!known.count(toks[j]))
                throw Error("splits:" + std::to_string(i + 1) + ": unknown task id '" + toks[j] + "'");
            if (!test_set.insert(toks[j]).second)
                throw Error("splits:" + std::to_string(i + 1) + ": duplicate task id '" + toks[j] +
                            "'");
        }
        fold.test_ids.assign(test_set.begin(), test_set.end());
        for (const std::string& id : all_ids)
            if (!test_set.count(id)) fold.train_ids.push_back(id);
        std::sort(fold.train_ids.begin(), fold.train_ids.end());
        folds.push_back(std::move(fold));
    }
    if (folds.empty()) throw Error("splits: no folds found");
    return folds;
}

std::vector<FoldSpec> load_split_file(const std::filesystem::path& path,
                                      const std::vector<std::string>& all_ids) {
    return parse_split_file(read_file(path), all_ids);
}

std::string serialize_splits(const std::vector<FoldSpec>& folds) {
    std::ostringstream out;
    for (const FoldSpec& f : folds) {
        out << "fold " << f.fold_index << " test";
        for (const std::string& id : f.test_ids) out << ' ' << id;
        out << '\n';
    }
    return out.str();
}

// --- label encodings ---------------------------------------------------------------

std::array<std::uint8_t, kNumPlanners> derive_binary_labels(const RuntimeLabelSet& labels) {
    std::array<std::uint8_t, kNumPlanners> bits{};
    for (std::int32_t p = 0; p < kNumPlanners; ++p)
        bits[p] = labels.runtimes[p] <= kTimeoutSeconds ? 1 : 0;
    return bits;
}

BestPlanner derive_best_planner(const RuntimeLabelSet& labels) {
    BestPlanner best;
    best.index = static_cast<std::int32_t>(
        std::min_element(labels.runtimes.begin(), labels.runtimes.end()) - labels.runtimes.begin());
    best.no_solver = labels.runtimes[best.index] > kTimeoutSeconds;
    return best;
}

// --- correlation ---------------------------------------------------------------------

namespace {

bool all_equal(const std::vector<double>& x) {
    for (double v : x)
        if (v != x[0]) return false;
    return true;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y, bool& degenerate) {
    if (all_equal(x) || all_equal(y)) {
        degenerate = true;
        return 0.0;
    }
    const std::size_t n = x.size();
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0) {
        degenerate = true;
        return 0.0;
    }
    degenerate = false;
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace

CorrelationMatrix feature_label_correlation(const DatasetManifest& manifest,
                                            const NodeTypeVocab& vocab,
                                            const FeatureConfig& config) {
    config.validate();
    if (vocab.representation != manifest.representation)
        throw Error("feature_label_correlation: vocabulary does not match the manifest");
    if (manifest.entries.size() < 3)
        throw Error("feature_label_correlation: need at least 3 tasks");

    CorrelationMatrix cm;
    std::vector<std::vector<double>> columns;

    // Per-graph scalar per configured block: the graph-averaged feature value.
    for (FeatureBlock b : config.blocks) {
        cm.names.emplace_back(to_string(b));
        std::vector<double> col;
        col.reserve(manifest.entries.size());
        for (const auto& e : manifest.entries) {
            const PlanningGraph& g = e.graph;
            double value = 0.0;
            switch (b) {
                case FeatureBlock::node_type: {
                    double sum = 0.0;
                    for (std::int32_t t : g.node_types) sum += t;
                    value = g.num_nodes ? sum / g.num_nodes : 0.0;
                    break;
                }
                case FeatureBlock::in_degree:
                case FeatureBlock::out_degree:
                    value = g.num_nodes ? static_cast<double>(g.edges.size()) / g.num_nodes : 0.0;
                    break;
                case FeatureBlock::neighbor_type_in: {
                    double sum = 0.0;
                    for (const auto& [src, dst] : g.edges) sum += g.node_types[src];
                    value = g.edges.empty() ? 0.0 : sum / static_cast<double>(g.edges.size());
                    break;
                }
                case FeatureBlock::neighbor_type_out: {
                    double sum = 0.0;
                    for (const auto& [src, dst] : g.edges) sum += g.node_types[dst];
                    value = g.edges.empty() ? 0.0 : sum / static_cast<double>(g.edges.size());
                    break;
                }
            }
            col.push_back(value);
        }
        columns.push_back(std::move(col));
    }

    cm.names.emplace_back("time_label");
    {
        std::vector<double> col;
        for (const auto& e : manifest.entries) {
            double sum = 0.0;
            for (double t : e.labels.runtimes) sum += t;
            col.push_back(sum / kNumPlanners);
        }
        columns.push_back(std::move(col));
    }
    cm.names.emplace_back("solvable_label");
    {
        std::vector<double> col;
        for (const auto& e : manifest.entries) {
            const auto bits = derive_binary_labels(e.labels);
            double sum = 0.0;
            for (std::uint8_t b : bits) sum += b;
            col.push_back(sum / kNumPlanners);
        }
        columns.push_back(std::move(col));
    }

    const std::size_t d = cm.names.size();
    cm.r = Matrix(d, d);
    cm.degenerate.assign(d, 0);
    for (std::size_t i = 0; i < d; ++i) {
        bool deg = false;
        pearson(columns[i], columns[i], deg);
        cm.degenerate[i] = deg ? 1 : 0;
    }
    for (std::size_t i = 0; i < d; ++i) {
        cm.r.at(i, i) = 1.0;
        for (std::size_t j = i + 1; j < d; ++j) {
            bool deg = false;
            const double r = pearson(columns[i], columns[j], deg);
            cm.r.at(i, j) = r;
            cm.r.at(j, i) = r;
        }
    }
    return cm;
}

}  // namespace plansel
