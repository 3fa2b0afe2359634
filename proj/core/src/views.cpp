#include "tabattn/views.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace tabattn {

namespace {

constexpr std::pair<Strategy, std::string_view> kStrategyNames[] = {
    {Strategy::DT, "DT"},         {Strategy::GBDT, "GBDT"},     {Strategy::RF, "RF"},
    {Strategy::LR, "LR"},         {Strategy::PEARSON, "PEARSON"}, {Strategy::KMEANS, "KMEANS"},
    {Strategy::GLOBAL, "GLOBAL"},
};

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

KMeansResult kmeans_once(const Matrix& points, const KMeansParams& params, Rng& rng) {
    const std::size_t n = points.rows(), k = params.k;
    KMeansResult res;
    res.centroids = Matrix(k, points.cols());

    // k-means++ seeding.
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    std::size_t first = rng.below(n);
    std::copy(points.row(first).begin(), points.row(first).end(), res.centroids.row(0).begin());
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], squared_distance(points.row(i), res.centroids.row(c - 1)));
            total += d2[i];
        }
        std::size_t pick = n - 1;
        if (total > 0.0) {
            double target = rng.uniform() * total;
            for (std::size_t i = 0; i < n; ++i) {
                target -= d2[i];
                if (target < 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = rng.below(n);
        }
        std::copy(points.row(pick).begin(), points.row(pick).end(), res.centroids.row(c).begin());
    }

    res.assignment.assign(n, 0);
    std::vector<std::size_t> counts(k);
    Matrix sums(k, points.cols());
    for (res.iterations = 1; res.iterations <= params.max_iterations; ++res.iterations) {
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double best_d = squared_distance(points.row(i), res.centroids.row(0));
            for (std::size_t c = 1; c < k; ++c) {
                const double d = squared_distance(points.row(i), res.centroids.row(c));
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            res.assignment[i] = best;
        }
        sums.fill(0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            auto s = sums.row(res.assignment[i]);
            auto p = points.row(i);
            for (std::size_t j = 0; j < p.size(); ++j) s[j] += p[j];
            ++counts[res.assignment[i]];
        }
        double max_shift = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;  // empty cluster keeps its centroid
            auto s = sums.row(c);
            auto cen = res.centroids.row(c);
            double shift = 0.0;
            for (std::size_t j = 0; j < s.size(); ++j) {
                const double v = s[j] / static_cast<double>(counts[c]);
                shift += (v - cen[j]) * (v - cen[j]);
                cen[j] = v;
            }
            max_shift = std::max(max_shift, std::sqrt(shift));
        }
        if (max_shift < params.tolerance) break;
    }
    res.iterations = std::min(res.iterations, params.max_iterations);

    // Final assignment against the settled centroids.
    res.inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        double best_d = squared_distance(points.row(i), res.centroids.row(0));
        for (std::size_t c = 1; c < k; ++c) {
            const double d = squared_distance(points.row(i), res.centroids.row(c));
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        res.assignment[i] = best;
        res.inertia += best_d;
    }
    return res;
}

}  // namespace

std::string_view to_string(Strategy s) {
    for (const auto& [k, name] : kStrategyNames)
        if (k == s) return name;
    return "?";
}

Strategy strategy_from_string(std::string_view s) {
    for (const auto& [k, name] : kStrategyNames)
        if (name == s) return k;
    throw std::invalid_argument("unknown view strategy: " + std::string(s));
}

ViewSet ViewSet::first_locals(std::size_t k) const {
    if (k > locals.size()) throw std::invalid_argument("first_locals: only " + std::to_string(locals.size()) + " views");
    ViewSet out;
    out.global = global;
    out.locals.assign(locals.begin(), locals.begin() + static_cast<std::ptrdiff_t>(k));
    return out;
}

std::string ViewSet::digest() const {
    const std::string text = nlohmann::json(*this).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void to_json(nlohmann::json& j, const ViewSet& v) {
    j = nlohmann::json::object();
    j["global"] = v.global.indices;
    auto locals = nlohmann::json::array();
    for (const auto& view : v.locals)
        locals.push_back({{"strategy", std::string(to_string(view.strategy))}, {"indices", view.indices}});
    j["locals"] = std::move(locals);
}

void from_json(const nlohmann::json& j, ViewSet& v) {
    v.global.strategy = Strategy::GLOBAL;
    v.global.indices = j.at("global").get<std::vector<std::size_t>>();
    v.locals.clear();
    for (const auto& item : j.at("locals")) {
        FeatureView view;
        view.strategy = strategy_from_string(item.at("strategy").get<std::string>());
        view.indices = item.at("indices").get<std::vector<std::size_t>>();
        if (view.indices.empty() || !std::is_sorted(view.indices.begin(), view.indices.end()) ||
            std::adjacent_find(view.indices.begin(), view.indices.end()) != view.indices.end())
            throw std::runtime_error("view set: indices must be non-empty and strictly increasing");
        v.locals.push_back(std::move(view));
    }
}

ImportanceVector dt_importance(const Dataset& data, const trees::TreeParams& params) {
    Rng rng(0);  // unused with all features as candidates
    trees::TreeParams p = params;
    p.features_per_node = 0;
    return {Strategy::DT, trees::fit_gain_tree(data, p, rng).importance};
}

ImportanceVector rf_importance(const Dataset& data, std::size_t n_trees, int max_depth, std::uint64_t seed) {
    trees::ForestParams p;
    p.n_trees = n_trees;
    p.tree.max_depth = max_depth;
    return rf_importance(data, p, seed);
}

ImportanceVector rf_importance(const Dataset& data, const trees::ForestParams& params, std::uint64_t seed) {
    return {Strategy::RF, trees::fit_random_forest(data, params, seed).importance};
}

ImportanceVector gbdt_importance(const Dataset& data, std::size_t n_trees, int max_depth, double shrinkage,
                                 std::uint64_t seed) {
    trees::GbdtParams p;
    p.n_trees = n_trees;
    p.max_depth = max_depth;
    p.shrinkage = shrinkage;
    return {Strategy::GBDT, trees::fit_gbdt(data, p, seed).importance};
}

ImportanceVector lr_importance(const Dataset& data, const LogisticParams& params) {
    auto model = fit_logistic(data, params);
    ImportanceVector out{Strategy::LR, model.coef};
    for (double& v : out.scores) v = std::abs(v);
    return out;
}

ImportanceVector pearson_importance(const Dataset& data) {
    const std::size_t n = data.rows();
    if (n == 0) throw std::invalid_argument("pearson_importance: empty dataset");
    const double dn = static_cast<double>(n);
    double y_mean = 0.0;
    for (int y : data.labels) y_mean += y;
    y_mean /= dn;
    double y_var = 0.0;
    for (int y : data.labels) y_var += (y - y_mean) * (y - y_mean);

    ImportanceVector out{Strategy::PEARSON, std::vector<double>(data.cols(), 0.0)};
    for (std::size_t j = 0; j < data.cols(); ++j) {
        double x_mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) x_mean += data.features(i, j);
        x_mean /= dn;
        double cov = 0.0, x_var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double dx = data.features(i, j) - x_mean;
            cov += dx * (data.labels[i] - y_mean);
            x_var += dx * dx;
        }
        if (x_var > 0.0 && y_var > 0.0) out.scores[j] = std::abs(cov / std::sqrt(x_var * y_var));
    }
    return out;
}

KMeansResult kmeans(const Matrix& points, const KMeansParams& params, std::uint64_t seed) {
    if (params.k == 0) throw std::invalid_argument("kmeans: k must be positive");
    if (points.rows() < params.k)
        throw std::invalid_argument("kmeans: " + std::to_string(points.rows()) + " points for k=" +
                                    std::to_string(params.k));
    KMeansResult best;
    const std::size_t restarts = std::max<std::size_t>(1, params.restarts);
    for (std::size_t r = 0; r < restarts; ++r) {
        Rng rng = make_rng(seed, Stream::KMeans, r);
        auto res = kmeans_once(points, params, rng);
        if (r == 0 || res.inertia < best.inertia) best = std::move(res);
    }
    return best;
}

FeatureView kmeans_view(const Dataset& data, const KMeansParams& params, std::uint64_t seed) {
    if (data.cols() < params.k)
        throw std::invalid_argument("kmeans_view: fewer features (" + std::to_string(data.cols()) + ") than k=" +
                                    std::to_string(params.k));
    // Features become points in sample space.
    Matrix points(data.cols(), data.rows());
    for (std::size_t i = 0; i < data.rows(); ++i)
        for (std::size_t j = 0; j < data.cols(); ++j) points(j, i) = data.features(i, j);
    const auto res = kmeans(points, params, seed);

    std::vector<std::size_t> counts(params.k, 0);
    std::vector<std::size_t> first_member(params.k, data.cols());
    for (std::size_t j = 0; j < data.cols(); ++j) {
        const auto c = res.assignment[j];
        ++counts[c];
        first_member[c] = std::min(first_member[c], j);
    }
    std::size_t chosen = 0;
    for (std::size_t c = 1; c < params.k; ++c) {
        if (counts[c] > counts[chosen] || (counts[c] == counts[chosen] && first_member[c] < first_member[chosen]))
            chosen = c;
    }
    FeatureView view{Strategy::KMEANS, {}};
    for (std::size_t j = 0; j < data.cols(); ++j)
        if (res.assignment[j] == chosen) view.indices.push_back(j);
    return view;
}

FeatureView top_fraction(const ImportanceVector& scores, double fraction) {
    const std::size_t n = scores.scores.size();
    if (n == 0) throw std::invalid_argument("top_fraction: empty score vector");
    if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("top_fraction: fraction must lie in (0,1]");
    // Guard against 0.3 * 10 = 3.0000000000000004 rounding up to 4.
    const auto keep = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9)), 1, n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores.scores[a] > scores.scores[b]; });
    order.resize(keep);
    std::sort(order.begin(), order.end());
    return {scores.strategy, std::move(order)};
}

ViewSet build_view_set(const Dataset& train, const ViewConfig& config, std::uint64_t seed) {
    if (train.cols() == 0) throw std::invalid_argument("build_view_set: dataset has no features");
    ViewSet vs;
    vs.global.strategy = Strategy::GLOBAL;
    vs.global.indices.resize(train.cols());
    std::iota(vs.global.indices.begin(), vs.global.indices.end(), 0);

    KMeansParams km = config.kmeans;
    km.k = std::min(km.k, train.cols());

    vs.locals.push_back(top_fraction(dt_importance(train, config.tree), config.fraction));
    vs.locals.push_back(top_fraction({Strategy::GBDT, trees::fit_gbdt(train, config.gbdt, seed).importance},
                                     config.fraction));
    vs.locals.push_back(top_fraction(rf_importance(train, config.forest, seed), config.fraction));
    vs.locals.push_back(top_fraction(lr_importance(train, config.logistic), config.fraction));
    vs.locals.push_back(kmeans_view(train, km, seed));
    vs.locals.push_back(top_fraction(pearson_importance(train), config.fraction));
    return vs;
}

}  // namespace tabattn
