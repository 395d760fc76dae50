#include "plansel/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "plansel/common.hpp"

namespace plansel::gbdt {

const char* to_string(Objective o) {
    switch (o) {
        case Objective::squared: return "squared";
        case Objective::logistic: return "logistic";
        case Objective::softmax: return "softmax";
    }
    return "?";
}

Objective objective_from_string(const std::string& s) {
    if (s == "squared") return Objective::squared;
    if (s == "logistic") return Objective::logistic;
    if (s == "softmax") return Objective::softmax;
    throw Error("unknown objective '" + s + "'");
}

void BoostConfig::validate() const {
    if (rounds < 1) throw Error("BoostConfig: rounds must be >= 1");
    if (max_depth < 0) throw Error("BoostConfig: max_depth must be >= 0");
    if (patience < 1) throw Error("BoostConfig: patience must be >= 1");
    if (lambda < 0.0) throw Error("BoostConfig: lambda must be >= 0");
    if (gamma < 0.0) throw Error("BoostConfig: gamma must be >= 0");
    if (objective == Objective::softmax && num_classes < 2)
        throw Error("BoostConfig: softmax needs num_classes >= 2");
}

double RegressionTree::predict_row(const double* row) const {
    std::int32_t at = 0;
    while (!nodes[at].is_leaf)
        at = row[nodes[at].feature] < nodes[at].threshold ? nodes[at].left : nodes[at].right;
    return nodes[at].weight;
}

// --- gradients ------------------------------------------------------------

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void softmax_row(const double* margin, double* prob, std::int32_t c) {
    double mx = margin[0];
    for (std::int32_t j = 1; j < c; ++j) mx = std::max(mx, margin[j]);
    double sum = 0.0;
    for (std::int32_t j = 0; j < c; ++j) {
        prob[j] = std::exp(margin[j] - mx);
        sum += prob[j];
    }
    for (std::int32_t j = 0; j < c; ++j) prob[j] /= sum;
}

}  // namespace

void grad_hess(Objective objective, std::span<const double> y, const Matrix& margins, Matrix& g,
               Matrix& h) {
    const std::size_t n = y.size();
    if (margins.rows != n) throw Error("grad_hess: margin rows do not match label count");
    const std::size_t c = margins.cols;
    g = Matrix(n, c);
    h = Matrix(n, c);
    switch (objective) {
        case Objective::squared:
            for (std::size_t i = 0; i < n; ++i) {
                g.at(i, 0) = margins.at(i, 0) - y[i];
                h.at(i, 0) = 1.0;
            }
            break;
        case Objective::logistic:
            for (std::size_t i = 0; i < n; ++i) {
                const double p = sigmoid(margins.at(i, 0));
                g.at(i, 0) = p - y[i];
                h.at(i, 0) = p * (1.0 - p);
            }
            break;
        case Objective::softmax: {
            std::vector<double> prob(c);
            for (std::size_t i = 0; i < n; ++i) {
                const auto label = static_cast<std::int64_t>(y[i]);
                if (label < 0 || static_cast<std::size_t>(label) >= c ||
                    static_cast<double>(label) != y[i])
                    throw Error("grad_hess: invalid class label " + std::to_string(y[i]));
                softmax_row(margins.row(i), prob.data(), static_cast<std::int32_t>(c));
                for (std::size_t j = 0; j < c; ++j) {
                    g.at(i, j) = prob[j] - (static_cast<std::size_t>(label) == j ? 1.0 : 0.0);
                    h.at(i, j) = prob[j] * (1.0 - prob[j]);
                }
            }
            break;
        }
    }
}

// --- tree growing --------------------------------------------------------------

namespace {

struct BestSplit {
    double gain = 0.0;
    std::int32_t feature = -1;
    double threshold = 0.0;
    bool found = false;
};

// strictly-better-or-wins-tie ordering on (gain desc, feature asc, threshold asc)
bool beats(double gain, std::int32_t feature, double threshold, const BestSplit& best) {
    if (!best.found) return true;
    if (gain != best.gain) return gain > best.gain;
    if (feature != best.feature) return feature < best.feature;
    return threshold < best.threshold;
}

struct TreeBuilder {
    const Matrix& x;
    std::span<const double> g;
    std::span<const double> h;
    const BoostConfig& config;
    std::vector<TreeNode> nodes;

    std::int32_t build(std::vector<std::size_t>& samples, std::int32_t depth) {
        double gsum = 0.0, hsum = 0.0;
        for (std::size_t i : samples) {
            gsum += g[i];
            hsum += h[i];
        }
        const std::int32_t self = static_cast<std::int32_t>(nodes.size());
        nodes.emplace_back();
        nodes[self].weight = -gsum / (hsum + config.lambda);

        if (depth >= config.max_depth || samples.size() < 2) return self;

        BestSplit best;
        const double parent_score = gsum * gsum / (hsum + config.lambda);
        std::vector<std::pair<double, std::size_t>> sorted;
        sorted.reserve(samples.size());
        for (std::int32_t f = 0; f < static_cast<std::int32_t>(x.cols); ++f) {
            sorted.clear();
            for (std::size_t i : samples) sorted.emplace_back(x.at(i, f), i);
            std::sort(sorted.begin(), sorted.end());
            double gl = 0.0, hl = 0.0;
            for (std::size_t pos = 0; pos + 1 < sorted.size(); ++pos) {
                gl += g[sorted[pos].second];
                hl += h[sorted[pos].second];
                if (sorted[pos + 1].first <= sorted[pos].first) continue;
                const double threshold = 0.5 * (sorted[pos].first + sorted[pos + 1].first);
                const double gr = gsum - gl;
                const double hr = hsum - hl;
                const double gain = 0.5 * (gl * gl / (hl + config.lambda) +
                                           gr * gr / (hr + config.lambda) - parent_score) -
                                    config.gamma;
                if (beats(gain, f, threshold, best)) {
                    best = {gain, f, threshold, true};
                }
            }
        }
        if (!best.found || best.gain <= 0.0) return self;

        std::vector<std::size_t> left, right;
        for (std::size_t i : samples)
            (x.at(i, best.feature) < best.threshold ? left : right).push_back(i);
        samples.clear();
        samples.shrink_to_fit();

        const std::int32_t l = build(left, depth + 1);
        const std::int32_t r = build(right, depth + 1);
        nodes[self].is_leaf = false;
        nodes[self].feature = best.feature;
        nodes[self].threshold = best.threshold;
        nodes[self].left = l;
        nodes[self].right = r;
        return self;
    }
};

}  // namespace

RegressionTree fit_tree(const Matrix& x, std::span<const double> g, std::span<const double> h,
                        const BoostConfig& config) {
    if (x.rows == 0) throw Error("fit_tree: need at least one sample");
    if (g.size() != x.rows || h.size() != x.rows)
        throw Error("fit_tree: gradient count does not match sample count");
    TreeBuilder builder{x, g, h, config, {}};
    std::vector<std::size_t> samples(x.rows);
    std::iota(samples.begin(), samples.end(), 0);
    builder.build(samples, 0);
    return RegressionTree{std::move(builder.nodes)};
}

// --- boosting ----------------------------------------------------------------

namespace {

double eval_loss(Objective objective, std::span<const double> y, const Matrix& margins) {
    const std::size_t n = y.size();
    double acc = 0.0;
    switch (objective) {
        case Objective::squared:
            for (std::size_t i = 0; i < n; ++i) {
                const double d = margins.at(i, 0) - y[i];
                acc += d * d;
            }
            break;
        case Objective::logistic:
            for (std::size_t i = 0; i < n; ++i) {
                const double z = margins.at(i, 0);
                const double t = -z * (2.0 * y[i] - 1.0);
                acc += (t > 0.0 ? t : 0.0) + std::log1p(std::exp(-std::abs(t)));
            }
            break;
        case Objective::softmax: {
            std::vector<double> prob(margins.cols);
            for (std::size_t i = 0; i < n; ++i) {
                softmax_row(margins.row(i), prob.data(), static_cast<std::int32_t>(margins.cols));
                const auto label = static_cast<std::size_t>(y[i]);
                acc += -std::log(std::max(prob[label], 1e-300));
            }
            break;
        }
    }
    return acc / static_cast<double>(n);
}

}  // namespace

BoostedEnsemble boost_fit(const Matrix& x, std::span<const double> y, const Matrix* x_valid,
                          std::span<const double> y_valid, const BoostConfig& config) {
    config.validate();
    if (x.rows == 0 || x.rows != y.size()) throw Error("boost_fit: feature/label row mismatch");
    for (double v : y)
        if (!std::isfinite(v)) throw Error("boost_fit: non-finite label");
    for (double v : x.v)
        if (!std::isfinite(v)) throw Error("boost_fit: non-finite feature");
    const bool has_valid = x_valid != nullptr;
    if (has_valid && x_valid->rows != y_valid.size())
        throw Error("boost_fit: validation feature/label row mismatch");

    BoostedEnsemble e;
    e.config = config;
    const std::int32_t classes = config.class_count();
    if (config.objective == Objective::squared)
        e.base_score = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());

    Matrix train_margin(x.rows, classes, e.base_score);
    Matrix valid_margin(has_valid ? x_valid->rows : 0, classes, e.base_score);

    double best_loss = std::numeric_limits<double>::infinity();
    std::int32_t rounds_since_best = 0;
    Matrix g, h;
    std::vector<double> gcol(x.rows), hcol(x.rows);

    for (std::int32_t round = 0; round < config.rounds; ++round) {
        grad_hess(config.objective, y, train_margin, g, h);
        std::vector<RegressionTree> trees;
        trees.reserve(classes);
        for (std::int32_t c = 0; c < classes; ++c) {
            for (std::size_t i = 0; i < x.rows; ++i) {
                gcol[i] = g.at(i, c);
                hcol[i] = h.at(i, c);
            }
            trees.push_back(fit_tree(x, gcol, hcol, config));
            for (std::size_t i = 0; i < x.rows; ++i)
                train_margin.at(i, c) += config.learning_rate * trees[c].predict_row(x.row(i));
            if (has_valid)
                for (std::size_t i = 0; i < x_valid->rows; ++i)
                    valid_margin.at(i, c) +=
                        config.learning_rate * trees[c].predict_row(x_valid->row(i));
        }
        e.rounds.push_back(std::move(trees));
        e.train_loss.push_back(eval_loss(config.objective, y, train_margin));

        if (has_valid) {
            const double vloss = eval_loss(config.objective, y_valid, valid_margin);
            e.valid_loss.push_back(vloss);
            if (vloss < best_loss) {
                best_loss = vloss;
                e.best_round = round + 1;
                rounds_since_best = 0;
            } else {
                rounds_since_best += 1;
                if (rounds_since_best >= config.patience) break;
            }
        } else {
            e.best_round = round + 1;
        }
    }
    if (e.best_round == 0) e.best_round = static_cast<std::int32_t>(e.rounds.size());
    return e;
}

Matrix BoostedEnsemble::margins(const Matrix& x) const {
    if (x.cols == 0 && !rounds.empty()) throw Error("predict: empty feature matrix");
    const std::int32_t classes = config.class_count();
    Matrix m(x.rows, classes, base_score);
    const std::int32_t used = std::min<std::int32_t>(best_round, static_cast<std::int32_t>(rounds.size()));
    for (std::int32_t r = 0; r < used; ++r)
        for (std::int32_t c = 0; c < classes; ++c)
            for (std::size_t i = 0; i < x.rows; ++i)
                m.at(i, c) += config.learning_rate * rounds[r][c].predict_row(x.row(i));
    return m;
}

Matrix BoostedEnsemble::predict(const Matrix& x) const {
    Matrix m = margins(x);
    switch (config.objective) {
        case Objective::squared:
            return m;
        case Objective::logistic:
            for (double& v : m.v) v = sigmoid(v);
            return m;
        case Objective::softmax: {
            std::vector<double> prob(m.cols);
            for (std::size_t i = 0; i < m.rows; ++i) {
                softmax_row(m.row(i), prob.data(), static_cast<std::int32_t>(m.cols));
                for (std::size_t j = 0; j < m.cols; ++j) m.at(i, j) = prob[j];
            }
            return m;
        }
    }
    throw Error("predict: unreachable");
}

// --- serialization ----------------------------------------------------------------

std::string serialize_ensemble(const BoostedEnsemble& e) {
    std::ostringstream out;
    out.precision(17);
    out << "PSGB1\n";
    out << "objective " << to_string(e.config.objective) << '\n';
    out << "classes " << e.config.class_count() << '\n';
    out << "learning_rate " << e.config.learning_rate << '\n';
    out << "base_score " << e.base_score << '\n';
    out << "best_round " << e.best_round << '\n';
    out << "rounds " << e.rounds.size() << '\n';
    for (std::size_t r = 0; r < e.rounds.size(); ++r) {
        for (std::size_t c = 0; c < e.rounds[r].size(); ++c) {
            const RegressionTree& tree = e.rounds[r][c];
            out << "tree " << r << ' ' << c << ' ' << tree.nodes.size() << '\n';
            for (const TreeNode& n : tree.nodes) {
                if (n.is_leaf)
                    out << n.weight << '\n';
                else
                    out << n.feature << ' ' << n.threshold << ' ' << n.left << ' ' << n.right << '\n';
            }
        }
    }
    return out.str();
}

BoostedEnsemble parse_ensemble(const std::string& text) {
    std::istringstream in(text);
    std::string tok;
    auto expect = [&](const char* what) {
        if (!(in >> tok)) throw Error(std::string("ensemble: truncated before ") + what);
        return tok;
    };
    if (expect("magic") != "PSGB1") throw Error("ensemble: bad magic");
    BoostedEnsemble e;
    if (expect("objective keyword") != "objective") throw Error("ensemble: expected objective");
    e.config.objective = objective_from_string(expect("objective"));
    if (expect("classes keyword") != "classes") throw Error("ensemble: expected classes");
    std::int32_t classes = std::stoi(expect("class count"));
    if (e.config.objective == Objective::softmax) e.config.num_classes = classes;
    if (expect("learning_rate keyword") != "learning_rate")
        throw Error("ensemble: expected learning_rate");
    e.config.learning_rate = std::stod(expect("learning rate"));
    if (expect("base_score keyword") != "base_score") throw Error("ensemble: expected base_score");
    e.base_score = std::stod(expect("base score"));
    if (expect("best_round keyword") != "best_round") throw Error("ensemble: expected best_round");
    e.best_round = std::stoi(expect("best round"));
    if (expect("rounds keyword") != "rounds") throw Error("ensemble: expected rounds");
    const std::int32_t round_count = std::stoi(expect("round count"));
    e.rounds.assign(round_count, {});
    for (std::int32_t r = 0; r < round_count; ++r) {
        for (std::int32_t c = 0; c < classes; ++c) {
            if (expect("tree keyword") != "tree") throw Error("ensemble: expected tree");
            const std::int32_t tr = std::stoi(expect("tree round"));
            const std::int32_t tc = std::stoi(expect("tree class"));
            if (tr != r || tc != c) throw Error("ensemble: trees out of order");
            const std::int32_t count = std::stoi(expect("node count"));
            RegressionTree tree;
            std::string line;
            std::getline(in, line);  // consume end of header line
            for (std::int32_t nidx = 0; nidx < count; ++nidx) {
                if (!std::getline(in, line)) throw Error("ensemble: truncated tree");
                std::istringstream ls(line);
                std::vector<std::string> parts;
                while (ls >> tok) parts.push_back(tok);
                TreeNode node;
                if (parts.size() == 1) {
                    node.weight = std::stod(parts[0]);
                } else if (parts.size() == 4) {
                    node.is_leaf = false;
                    node.feature = std::stoi(parts[0]);
                    node.threshold = std::stod(parts[1]);
                    node.left = std::stoi(parts[2]);
                    node.right = std::stoi(parts[3]);
                } else {
                    throw Error("ensemble: malformed node line '" + line + "'");
                }
                tree.nodes.push_back(node);
            }
            e.rounds[r].push_back(std::move(tree));
        }
    }
    return e;
}

}  // namespace plansel::gbdt
