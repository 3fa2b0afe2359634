#include "tabattn/trees.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "tabattn/nn.hpp"

namespace tabattn::trees {

namespace {

double xlog2x(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

// Feature candidates for one node, ascending so ties resolve to the lower index.
std::vector<std::size_t> candidate_features(std::size_t n_features, std::size_t per_node, Rng& rng) {
    std::vector<std::size_t> all(n_features);
    std::iota(all.begin(), all.end(), 0);
    if (per_node == 0 || per_node >= n_features) return all;
    for (std::size_t i = 0; i < per_node; ++i) {
        std::size_t j = i + rng.below(n_features - i);
        std::swap(all[i], all[j]);
    }
    all.resize(per_node);
    std::sort(all.begin(), all.end());
    return all;
}

struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

class GainTreeBuilder {
public:
    GainTreeBuilder(const Matrix& x, std::span<const int> y, std::span<const double> w, const TreeParams& params,
                    Rng& rng)
        : x_(x), y_(y), w_(w), params_(params), rng_(rng), importance_(x.cols(), 0.0) {}

    GainTreeFit run(std::vector<std::size_t> rows) {
        root_weight_ = total_weight(rows);
        build(std::move(rows), 0);
        return {std::move(tree_), std::move(importance_)};
    }

private:
    double weight(std::size_t r) const { return w_.empty() ? 1.0 : w_[r]; }

    double total_weight(const std::vector<std::size_t>& rows) const {
        double s = 0.0;
        for (auto r : rows) s += weight(r);
        return s;
    }

    SplitChoice best_split(const std::vector<std::size_t>& rows, double pos, double total) {
        const double parent = entropy_from_counts(pos, total);
        SplitChoice best;
        std::vector<std::size_t> order = rows;
        for (std::size_t f : candidate_features(x_.cols(), params_.features_per_node, rng_)) {
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return x_(a, f) < x_(b, f); });
            double left_pos = 0.0, left_total = 0.0;
            for (std::size_t i = 0; i + 1 < order.size(); ++i) {
                const std::size_t r = order[i];
                left_total += weight(r);
                if (y_[r] == 1) left_pos += weight(r);
                const double v = x_(r, f);
                const double next = x_(order[i + 1], f);
                if (!(next > v)) continue;
                const double right_total = total - left_total;
                const double gain = parent - (left_total / total) * entropy_from_counts(left_pos, left_total) -
                                    (right_total / total) * entropy_from_counts(pos - left_pos, right_total);
                if (best.feature < 0 || gain > best.gain + kGainTolerance) {
                    best = {static_cast<int>(f), 0.5 * (v + next), gain};
                }
            }
        }
        return best;
    }

    int build(std::vector<std::size_t> rows, int depth) {
        double pos = 0.0, total = 0.0;
        for (auto r : rows) {
            total += weight(r);
            if (y_[r] == 1) pos += weight(r);
        }
        const int id = static_cast<int>(tree_.nodes.size());
        TreeNode node;
        node.weight = total;
        node.depth = depth;
        node.positive_fraction = total > 0.0 ? pos / total : 0.0;
        node.label = pos > total - pos ? 1 : 0;
        tree_.nodes.push_back(node);

        const bool pure = pos <= 0.0 || pos >= total;
        if (pure || depth >= params_.max_depth || rows.size() < params_.min_samples) return id;
        SplitChoice split = best_split(rows, pos, total);
        if (split.feature < 0 || split.gain <= kGainTolerance) return id;

        std::vector<std::size_t> left, right;
        for (auto r : rows) (x_(r, split.feature) <= split.threshold ? left : right).push_back(r);
        importance_[split.feature] += split.gain * total / root_weight_;
        rows.clear();
        rows.shrink_to_fit();

        const int l = build(std::move(left), depth + 1);
        const int rgt = build(std::move(right), depth + 1);
        auto& n = tree_.nodes[id];
        n.feature = split.feature;
        n.threshold = split.threshold;
        n.gain = split.gain;
        n.left = l;
        n.right = rgt;
        return id;
    }

    const Matrix& x_;
    std::span<const int> y_;
    std::span<const double> w_;
    TreeParams params_;
    Rng& rng_;
    GainTree tree_;
    std::vector<double> importance_;
    double root_weight_ = 1.0;
};

class RegressionTreeBuilder {
public:
    RegressionTreeBuilder(const Matrix& x, std::span<const double> target, std::span<const double> hessian,
                          int max_depth, std::size_t min_samples, std::vector<double>& importance)
        : x_(x), target_(target), hessian_(hessian), max_depth_(max_depth), min_samples_(min_samples),
          importance_(importance) {}

    RegressionTree run(std::vector<std::size_t> rows) {
        build(std::move(rows), 0);
        return std::move(tree_);
    }

private:
    int build(std::vector<std::size_t> rows, int depth) {
        double sum = 0.0, hess = 0.0;
        for (auto r : rows) {
            sum += target_[r];
            hess += hessian_[r];
        }
        const int id = static_cast<int>(tree_.nodes.size());
        RegressionNode node;
        node.samples = rows.size();
        node.value = hess > 1e-12 ? sum / hess : 0.0;
        tree_.nodes.push_back(node);
        if (depth >= max_depth_ || rows.size() < min_samples_) return id;

        const double n = static_cast<double>(rows.size());
        const double parent_term = sum * sum / n;
        int best_feature = -1;
        double best_threshold = 0.0, best_gain = 0.0;
        std::vector<std::size_t> order = rows;
        for (std::size_t f = 0; f < x_.cols(); ++f) {
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return x_(a, f) < x_(b, f); });
            double left_sum = 0.0;
            for (std::size_t i = 0; i + 1 < order.size(); ++i) {
                left_sum += target_[order[i]];
                const double v = x_(order[i], f);
                const double next = x_(order[i + 1], f);
                if (!(next > v)) continue;
                const double nl = static_cast<double>(i + 1);
                const double nr = n - nl;
                const double right_sum = sum - left_sum;
                const double gain = left_sum * left_sum / nl + right_sum * right_sum / nr - parent_term;
                if (best_feature < 0 || gain > best_gain + kGainTolerance) {
                    best_feature = static_cast<int>(f);
                    best_threshold = 0.5 * (v + next);
                    best_gain = gain;
                }
            }
        }
        if (best_feature < 0 || best_gain <= kGainTolerance) return id;

        std::vector<std::size_t> left, right;
        for (auto r : rows) (x_(r, best_feature) <= best_threshold ? left : right).push_back(r);
        importance_[best_feature] += best_gain;
        const int l = build(std::move(left), depth + 1);
        const int rgt = build(std::move(right), depth + 1);
        auto& nd = tree_.nodes[id];
        nd.feature = best_feature;
        nd.threshold = best_threshold;
        nd.gain = best_gain;
        nd.left = l;
        nd.right = rgt;
        return id;
    }

    const Matrix& x_;
    std::span<const double> target_;
    std::span<const double> hessian_;
    int max_depth_;
    std::size_t min_samples_;
    std::vector<double>& importance_;
    RegressionTree tree_;
};

double mean_logistic_loss(std::span<const double> logits, std::span<const int> y) {
    double loss = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        // log(1 + e^z) - y z, evaluated stably.
        const double z = logits[i];
        loss += std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - (y[i] == 1 ? z : 0.0);
    }
    return loss / static_cast<double>(y.size());
}

}  // namespace

double entropy_from_counts(double positive, double total) {
    if (total <= 0.0) return 0.0;
    const double p = positive / total;
    return -(xlog2x(p) + xlog2x(1.0 - p));
}

double entropy(std::span<const int> labels) {
    if (labels.empty()) throw std::invalid_argument("entropy: empty label vector");
    const auto pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
    return entropy_from_counts(pos, static_cast<double>(labels.size()));
}

double info_gain(std::span<const double> feature, std::span<const int> labels, double threshold) {
    if (feature.size() != labels.size()) throw std::invalid_argument("info_gain: length mismatch");
    std::vector<int> branch(feature.size());
    for (std::size_t i = 0; i < feature.size(); ++i) branch[i] = feature[i] <= threshold ? 0 : 1;
    return info_gain(labels, branch);
}

double info_gain(std::span<const int> labels, std::span<const int> branch) {
    if (labels.size() != branch.size()) throw std::invalid_argument("info_gain: length mismatch");
    const double parent = entropy(labels);
    std::vector<int> ids(branch.begin(), branch.end());
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    const double l = static_cast<double>(labels.size());
    double conditional = 0.0;
    for (int b : ids) {
        double pos = 0.0, total = 0.0;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (branch[i] != b) continue;
            total += 1.0;
            pos += labels[i] == 1;
        }
        conditional += (total / l) * entropy_from_counts(pos, total);
    }
    return std::max(0.0, parent - conditional);
}

const TreeNode& GainTree::leaf_for(std::span<const double> x) const {
    const TreeNode* n = &nodes.at(0);
    while (!n->is_leaf()) n = &nodes[x[n->feature] <= n->threshold ? n->left : n->right];
    return *n;
}

int GainTree::depth() const {
    int d = 0;
    for (const auto& n : nodes) d = std::max(d, n.depth);
    return d;
}

GainTreeFit fit_gain_tree(const Dataset& data, const TreeParams& params, Rng& rng) {
    std::vector<std::size_t> rows(data.rows());
    std::iota(rows.begin(), rows.end(), 0);
    return fit_gain_tree(data.features, data.labels, rows, {}, params, rng);
}

GainTreeFit fit_gain_tree(const Matrix& x, std::span<const int> y, std::span<const std::size_t> rows,
                          std::span<const double> weights, const TreeParams& params, Rng& rng) {
    if (rows.empty()) throw std::invalid_argument("fit_gain_tree: no rows");
    if (y.size() != x.rows()) throw std::invalid_argument("fit_gain_tree: label count mismatch");
    if (!weights.empty() && weights.size() != x.rows())
        throw std::invalid_argument("fit_gain_tree: weight count mismatch");
    GainTreeBuilder builder(x, y, weights, params, rng);
    return builder.run({rows.begin(), rows.end()});
}

double RandomForest::predict_proba(std::span<const double> x) const {
    if (trees.empty()) return 0.0;
    double s = 0.0;
    for (const auto& t : trees) s += t.predict_proba(x);
    return s / static_cast<double>(trees.size());
}

ForestFit fit_random_forest(const Dataset& data, const ForestParams& params, std::uint64_t seed) {
    if (data.rows() == 0) throw std::invalid_argument("fit_random_forest: empty dataset");
    ForestFit fit;
    fit.importance.assign(data.cols(), 0.0);
    TreeParams tp = params.tree;
    tp.features_per_node = params.features_per_node != 0
                               ? params.features_per_node
                               : std::max<std::size_t>(1, static_cast<std::size_t>(
                                                              std::floor(std::sqrt(static_cast<double>(data.cols())))));
    const std::size_t n = data.rows();
    for (std::size_t t = 0; t < params.n_trees; ++t) {
        Rng rng = make_rng(seed, Stream::RandomForest, t);
        std::vector<std::size_t> rows(n);
        if (params.bootstrap) {
            for (auto& r : rows) r = rng.below(n);
            std::sort(rows.begin(), rows.end());
        } else {
            std::iota(rows.begin(), rows.end(), 0);
        }
        auto tree = fit_gain_tree(data.features, data.labels, rows, {}, tp, rng);
        for (std::size_t f = 0; f < data.cols(); ++f) fit.importance[f] += tree.importance[f];
        fit.forest.trees.push_back(std::move(tree.tree));
    }
    if (params.n_trees > 0)
        for (double& v : fit.importance) v /= static_cast<double>(params.n_trees);
    return fit;
}

double RegressionTree::predict(std::span<const double> x) const {
    const RegressionNode* n = &nodes.at(0);
    while (!n->is_leaf()) n = &nodes[x[n->feature] <= n->threshold ? n->left : n->right];
    return n->value;
}

double GbdtModel::predict_logit(std::span<const double> x) const {
    double z = base_logit;
    for (const auto& t : trees) z += shrinkage * t.predict(x);
    return z;
}

double GbdtModel::predict_proba(std::span<const double> x) const { return nn::sigmoid(predict_logit(x)); }

GbdtFit fit_gbdt(const Dataset& data, const GbdtParams& params, std::uint64_t seed) {
    const std::size_t n = data.rows();
    if (n == 0) throw std::invalid_argument("fit_gbdt: empty dataset");
    const std::size_t pos = data.positives();
    if (pos == 0 || pos == n) throw std::invalid_argument("fit_gbdt: both classes required");
    if (!(params.subsample > 0.0 && params.subsample <= 1.0))
        throw std::invalid_argument("fit_gbdt: subsample must lie in (0,1]");

    GbdtFit fit;
    fit.importance.assign(data.cols(), 0.0);
    fit.model.shrinkage = params.shrinkage;
    fit.model.base_logit = std::log(static_cast<double>(pos) / static_cast<double>(n - pos));

    std::vector<double> logits(n, fit.model.base_logit);
    std::vector<double> residual(n), hessian(n);
    fit.stage_loss.push_back(mean_logistic_loss(logits, data.labels));
    Rng rng = make_rng(seed, Stream::Gbdt);

    for (std::size_t t = 0; t < params.n_trees; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            const double p = nn::sigmoid(logits[i]);
            residual[i] = static_cast<double>(data.labels[i]) - p;
            hessian[i] = p * (1.0 - p);
        }
        std::vector<std::size_t> rows(n);
        std::iota(rows.begin(), rows.end(), 0);
        if (params.subsample < 1.0) {
            rng.shuffle(rows);
            rows.resize(std::max<std::size_t>(1, static_cast<std::size_t>(params.subsample * static_cast<double>(n))));
            std::sort(rows.begin(), rows.end());
        }
        RegressionTreeBuilder builder(data.features, residual, hessian, params.max_depth, params.min_samples,
                                      fit.importance);
        RegressionTree tree = builder.run(std::move(rows));
        for (std::size_t i = 0; i < n; ++i) logits[i] += params.shrinkage * tree.predict(data.features.row(i));
        fit.model.trees.push_back(std::move(tree));
        fit.stage_loss.push_back(mean_logistic_loss(logits, data.labels));
    }
    return fit;
}

}  // namespace tabattn::trees
