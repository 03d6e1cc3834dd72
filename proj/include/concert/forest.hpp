#pragma once

#include "concert/data_model.hpp"
#include "concert/types.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace concert {

using ClassCounts = std::array<double, kNumClasses>;

/// 1 - sum p_k^2. Throws on empty input.
double gini(const Labels& labels);
double gini(const ClassCounts& counts);

/// Flat CART tree. Node 0 is the root; a node with feature < 0 is a leaf.
/// Splits send x[feature] <= threshold to `left`.
struct DecisionTree {
    struct Node {
        int feature = -1;
        double threshold = 0.0;
        int left = -1;
        int right = -1;
        ClassCounts counts{};
        std::size_t depth = 0;
        double gain = 0.0;  // weighted gini decrease of the split
    };
    std::vector<Node> nodes;

    const Node& leaf_for(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
    int predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
    std::size_t depth() const;
    std::size_t leaf_count() const;
};

struct TreeConfig {
    std::optional<std::size_t> max_depth;  // unlimited when empty
    std::size_t min_samples_leaf = 1;
    std::optional<std::size_t> features_per_split;  // all features when empty
    std::uint64_t seed = 0;
};

/// Greedy best-gini splits over a seeded random feature subset per node,
/// thresholds at midpoints between sorted distinct values. When the subset
/// admits no valid split the remaining features are tried in the same random
/// order. Gain ties go to the lowest feature index, then the lowest threshold.
DecisionTree tree_fit(const Matrix& x, const Labels& y, const TreeConfig& config);
DecisionTree tree_fit(const Matrix& x, const Labels& y, const std::vector<std::size_t>& rows, const TreeConfig& config);

struct ForestConfig {
    std::size_t n_trees = 105;
    std::optional<std::size_t> max_depth = 47;
    std::size_t min_samples_leaf = 10;
    std::optional<std::size_t> features_per_split;  // ceil(sqrt(d)) when empty
    bool bootstrap = true;
    std::uint64_t seed = 0;
    unsigned threads = 0;
};

struct RandomForest {
    ForestConfig config;
    std::vector<DecisionTree> trees;
    std::vector<std::string> input_columns;
    std::size_t features_per_split = 0;
};

RandomForest forest_fit(const FeatureMatrix& x, const Labels& y, const ForestConfig& config);
/// Majority vote of per-tree predictions; ties go to the lowest class.
Labels forest_predict(const RandomForest& model, const FeatureMatrix& x);
/// Mean of per-tree leaf class frequencies.
Matrix forest_predict_proba(const RandomForest& model, const FeatureMatrix& x);

}  // namespace concert
