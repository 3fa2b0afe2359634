#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tabattn/data.hpp"
#include "tabattn/matrix.hpp"
#include "tabattn/rng.hpp"

namespace tabattn::trees {

// Gains closer than this are treated as ties; splits must beat it to count
// as positive.
inline constexpr double kGainTolerance = 1e-12;

// Label entropy in bits. Empty input is rejected.
double entropy(std::span<const int> labels);
// Entropy of a node holding `positive` weight out of `total`.
double entropy_from_counts(double positive, double total);

// Gain of the binary split feature <= threshold / feature > threshold.
double info_gain(std::span<const double> feature, std::span<const int> labels, double threshold);
// Gain of an arbitrary partition; branch[i] names the branch of sample i.
double info_gain(std::span<const int> labels, std::span<const int> branch);

struct TreeParams {
    int max_depth = 10;
    // Nodes with fewer rows than this become leaves.
    std::size_t min_samples = 2;
    // Candidate features drawn per node; 0 means all of them.
    std::size_t features_per_node = 0;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int label = 0;
    double positive_fraction = 0.0;
    double gain = 0.0;
    double weight = 0.0;  // summed sample weight reaching the node
    int depth = 0;

    bool is_leaf() const { return feature < 0; }
};

// Binary entropy-gain classification tree. Node 0 is the root; children
// are stored depth-first, left subtree before right.
struct GainTree {
    std::vector<TreeNode> nodes;

    const TreeNode& leaf_for(std::span<const double> x) const;
    double predict_proba(std::span<const double> x) const { return leaf_for(x).positive_fraction; }
    int predict(std::span<const double> x) const { return leaf_for(x).label; }
    int depth() const;
};

struct GainTreeFit {
    GainTree tree;
    // Per feature: sum over its split nodes of gain x (node weight / root weight).
    std::vector<double> importance;
};

GainTreeFit fit_gain_tree(const Dataset& data, const TreeParams& params, Rng& rng);
// Fit on `rows` (duplicates allowed, e.g. a bootstrap sample). `weights`
// is either empty (unit weights) or has one entry per dataset row.
GainTreeFit fit_gain_tree(const Matrix& x, std::span<const int> y, std::span<const std::size_t> rows,
                          std::span<const double> weights, const TreeParams& params, Rng& rng);

struct ForestParams {
    std::size_t n_trees = 50;
    TreeParams tree{};
    // Features per node; 0 picks floor(sqrt(n_features)).
    std::size_t features_per_node = 0;
    bool bootstrap = true;
};

struct RandomForest {
    std::vector<GainTree> trees;
    double predict_proba(std::span<const double> x) const;
};

struct ForestFit {
    RandomForest forest;
    std::vector<double> importance;  // mean of per-tree importances
};

ForestFit fit_random_forest(const Dataset& data, const ForestParams& params, std::uint64_t seed);

struct RegressionNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
    double gain = 0.0;  // squared-error reduction at this split
    std::size_t samples = 0;

    bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
    std::vector<RegressionNode> nodes;
    double predict(std::span<const double> x) const;
};

struct GbdtParams {
    std::size_t n_trees = 50;
    int max_depth = 10;
    std::size_t min_samples = 2;
    double shrinkage = 0.1;
    // Row fraction sampled (without replacement) per stage; 1 disables it.
    double subsample = 1.0;
};

// Logistic-loss gradient boosting over squared-error regression trees with
// Newton leaf values.
struct GbdtModel {
    double base_logit = 0.0;
    double shrinkage = 0.1;
    std::vector<RegressionTree> trees;

    double predict_logit(std::span<const double> x) const;
    double predict_proba(std::span<const double> x) const;
};

struct GbdtFit {
    GbdtModel model;
    std::vector<double> importance;
    // Mean logistic loss on the training rows after each stage; entry 0 is
    // the prior-only model.
    std::vector<double> stage_loss;
};

GbdtFit fit_gbdt(const Dataset& data, const GbdtParams& params, std::uint64_t seed);

}  // namespace tabattn::trees
