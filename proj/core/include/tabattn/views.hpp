#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tabattn/data.hpp"
#include "tabattn/logistic.hpp"
#include "tabattn/trees.hpp"

namespace tabattn {

enum class Strategy { DT, GBDT, RF, LR, PEARSON, KMEANS, GLOBAL };

std::string_view to_string(Strategy s);
Strategy strategy_from_string(std::string_view s);

struct ImportanceVector {
    Strategy strategy = Strategy::DT;
    std::vector<double> scores;
};

struct FeatureView {
    Strategy strategy = Strategy::GLOBAL;
    std::vector<std::size_t> indices;  // strictly increasing

    bool operator==(const FeatureView&) const = default;
};

// Local views are always ordered DT, GBDT, RF, LR, KMEANS, PEARSON.
struct ViewSet {
    FeatureView global;
    std::vector<FeatureView> locals;

    // Same global view, only the first `k` local views.
    ViewSet first_locals(std::size_t k) const;
    // FNV-1a over the JSON form; identifies a view set in checkpoints.
    std::string digest() const;

    bool operator==(const ViewSet&) const = default;
};

void to_json(nlohmann::json& j, const ViewSet& v);
void from_json(const nlohmann::json& j, ViewSet& v);

struct KMeansParams {
    std::size_t k = 4;
    std::size_t max_iterations = 300;
    double tolerance = 1e-6;
    // Independent k-means++ restarts; the lowest inertia wins.
    std::size_t restarts = 10;
};

struct ViewConfig {
    double fraction = 0.3;
    trees::TreeParams tree{};
    trees::ForestParams forest{};
    trees::GbdtParams gbdt{};
    LogisticParams logistic{};
    KMeansParams kmeans{};
};

ImportanceVector dt_importance(const Dataset& data, const trees::TreeParams& params = {});
ImportanceVector rf_importance(const Dataset& data, std::size_t n_trees, int max_depth, std::uint64_t seed);
ImportanceVector rf_importance(const Dataset& data, const trees::ForestParams& params, std::uint64_t seed);
ImportanceVector gbdt_importance(const Dataset& data, std::size_t n_trees, int max_depth, double shrinkage,
                                 std::uint64_t seed);
ImportanceVector lr_importance(const Dataset& data, const LogisticParams& params = {});
ImportanceVector pearson_importance(const Dataset& data);

struct KMeansResult {
    std::vector<std::size_t> assignment;
    Matrix centroids;
    double inertia = 0.0;
    std::size_t iterations = 0;
};

// Lloyd's algorithm with k-means++ seeding over the rows of `points`.
KMeansResult kmeans(const Matrix& points, const KMeansParams& params, std::uint64_t seed);

// Clusters feature columns (never the label) and returns the most populous
// cluster; ties go to the cluster holding the smallest feature index.
FeatureView kmeans_view(const Dataset& data, const KMeansParams& params, std::uint64_t seed);
inline FeatureView kmeans_view(const Dataset& data, std::size_t k, std::uint64_t seed) {
    KMeansParams p;
    p.k = k;
    return kmeans_view(data, p, seed);
}

// ceil(fraction * n) highest scores, ties to the lower index, sorted ascending.
FeatureView top_fraction(const ImportanceVector& scores, double fraction = 0.3);

ViewSet build_view_set(const Dataset& train, const ViewConfig& config, std::uint64_t seed);

}  // namespace tabattn
