#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "plansel/matrix.hpp"

namespace plansel::gbdt {

enum class Objective { squared, logistic, softmax };

const char* to_string(Objective o);
Objective objective_from_string(const std::string& s);

struct TreeNode {
    bool is_leaf = true;
    std::int32_t feature = -1;
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double weight = 0.0;
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // node 0 is the root

    double predict_row(const double* row) const;
};

struct BoostConfig {
    std::int32_t rounds = 500;
    std::int32_t max_depth = 5;
    double learning_rate = 0.01;
    double lambda = 1.0;  // L2 on leaf weights
    double gamma = 0.0;   // per-leaf penalty
    std::int32_t patience = 20;
    Objective objective = Objective::squared;
    std::int32_t num_classes = 1;  // > 1 only for softmax

    void validate() const;
    std::int32_t class_count() const { return objective == Objective::softmax ? num_classes : 1; }
};

// Additive model: margin = base_score + lr * sum of tree outputs, one tree per
// class per round. Rounds after best_round are kept serialized but never used
// at predict time.
struct BoostedEnsemble {
    BoostConfig config;
    double base_score = 0.0;
    std::int32_t best_round = 0;  // number of rounds used when predicting
    std::vector<std::vector<RegressionTree>> rounds;  // [round][class]
    std::vector<double> train_loss;  // per completed round
    std::vector<double> valid_loss;  // per completed round, empty without validation

    Matrix margins(const Matrix& x) const;   // n x classes
    Matrix predict(const Matrix& x) const;   // value / probability / class probabilities
};

// Per-sample first/second derivatives of the objective at the current margin.
// y holds the regression target, the 0/1 label, or the class index.
void grad_hess(Objective objective, std::span<const double> y, const Matrix& margins, Matrix& g,
               Matrix& h);

// Exact greedy split search on the second-order gain
//   1/2 [G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - G^2/(H+lambda)] - gamma
// with midpoint thresholds between consecutive distinct values and leaf
// weights -G/(H+lambda). Gain ties go to the lowest feature index, then the
// lowest threshold. A non-positive best gain stops the split.
RegressionTree fit_tree(const Matrix& x, std::span<const double> g, std::span<const double> h,
                        const BoostConfig& config);

// Sequential boosting with shrinkage. Validation data enables early stopping:
// the round with the lowest validation loss is kept once `patience` rounds
// pass without improvement.
BoostedEnsemble boost_fit(const Matrix& x, std::span<const double> y, const Matrix* x_valid,
                          std::span<const double> y_valid, const BoostConfig& config);

std::string serialize_ensemble(const BoostedEnsemble& e);
BoostedEnsemble parse_ensemble(const std::string& text);

}  // namespace plansel::gbdt
