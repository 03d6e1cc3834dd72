#include "concert/forest.hpp"

#include "concert/error.hpp"
#include "concert/random.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace concert {

namespace {

constexpr double kGainEpsilon = 1e-12;

ClassCounts count_labels(const Labels& y, const std::vector<std::size_t>& rows) {
    ClassCounts c{};
    for (auto r : rows) c[static_cast<std::size_t>(y[r])] += 1.0;
    return c;
}

double total(const ClassCounts& c) { return std::accumulate(c.begin(), c.end(), 0.0); }

int majority(const ClassCounts& c) {
    return static_cast<int>(std::max_element(c.begin(), c.end()) - c.begin());
}

void check_labels(const Labels& y) {
    for (int label : y)
        if (label < 0 || label >= kNumClasses)
            fail(ErrorCode::invalid_argument, fmt::format("label {} outside 0..4", label));
}

}  // namespace

double gini(const ClassCounts& counts) {
    const double n = total(counts);
    if (n <= 0.0) fail(ErrorCode::invalid_argument, "gini of an empty node");
    double sum_sq = 0.0;
    for (double c : counts) sum_sq += (c / n) * (c / n);
    return 1.0 - sum_sq;
}

double gini(const Labels& labels) {
    if (labels.empty()) fail(ErrorCode::invalid_argument, "gini of an empty label list");
    check_labels(labels);
    ClassCounts c{};
    for (int l : labels) c[static_cast<std::size_t>(l)] += 1.0;
    return gini(c);
}

const DecisionTree::Node& DecisionTree::leaf_for(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    const Node* node = &nodes.front();
    while (node->feature >= 0)
        node = &nodes[static_cast<std::size_t>(x(node->feature) <= node->threshold ? node->left : node->right)];
    return *node;
}

int DecisionTree::predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const { return majority(leaf_for(x).counts); }

std::size_t DecisionTree::depth() const {
    std::size_t d = 0;
    for (const auto& n : nodes) d = std::max(d, n.depth);
    return d;
}

std::size_t DecisionTree::leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const Node& n) { return n.feature < 0; }));
}

namespace {

struct SplitCandidate {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

bool better(const SplitCandidate& c, const SplitCandidate& best) {
    if (best.feature < 0) return true;
    if (c.gain > best.gain + kGainEpsilon) return true;
    if (c.gain < best.gain - kGainEpsilon) return false;
    if (c.feature != best.feature) return c.feature < best.feature;
    return c.threshold < best.threshold;
}

// Best split on one feature; returns false when the feature is constant on the node.
bool best_split_on(const Matrix& x, const Labels& y, const std::vector<std::size_t>& rows, std::size_t feature,
                   const ClassCounts& parent, double parent_gini, std::size_t min_leaf, SplitCandidate& best,
                   std::vector<std::size_t>& order) {
    const auto f = static_cast<Eigen::Index>(feature);
    order = rows;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double va = x(static_cast<Eigen::Index>(a), f), vb = x(static_cast<Eigen::Index>(b), f);
        return va < vb || (va == vb && a < b);
    });
    const double lo = x(static_cast<Eigen::Index>(order.front()), f);
    const double hi = x(static_cast<Eigen::Index>(order.back()), f);
    if (lo == hi) return false;

    const double n = static_cast<double>(order.size());
    ClassCounts left{};
    for (std::size_t pos = 0; pos + 1 < order.size(); ++pos) {
        left[static_cast<std::size_t>(y[order[pos]])] += 1.0;
        const double v = x(static_cast<Eigen::Index>(order[pos]), f);
        const double v_next = x(static_cast<Eigen::Index>(order[pos + 1]), f);
        if (v == v_next) continue;
        const std::size_t n_left = pos + 1;
        const std::size_t n_right = order.size() - n_left;
        if (n_left < min_leaf || n_right < min_leaf) continue;
        ClassCounts right;
        for (std::size_t k = 0; k < right.size(); ++k) right[k] = parent[k] - left[k];
        const double weighted = (static_cast<double>(n_left) * gini(left) + static_cast<double>(n_right) * gini(right)) / n;
        const double gain = parent_gini - weighted;
        if (gain <= kGainEpsilon) continue;
        double threshold = 0.5 * (v + v_next);
        if (!(threshold < v_next)) threshold = v;
        SplitCandidate c{static_cast<int>(feature), threshold, gain};
        if (better(c, best)) best = c;
    }
    return true;
}

}  // namespace

DecisionTree tree_fit(const Matrix& x, const Labels& y, const std::vector<std::size_t>& rows, const TreeConfig& config) {
    if (static_cast<std::size_t>(x.rows()) != y.size())
        fail(ErrorCode::invalid_argument, fmt::format("X has {} rows but y has {} labels", x.rows(), y.size()));
    check_labels(y);
    if (config.min_samples_leaf < 1) fail(ErrorCode::invalid_argument, "min_samples_leaf must be at least 1");
    if (rows.empty() || rows.size() < config.min_samples_leaf)
        fail(ErrorCode::invalid_argument,
             fmt::format("tree needs at least min_samples_leaf={} rows, got {}", config.min_samples_leaf, rows.size()));
    const auto d = static_cast<std::size_t>(x.cols());
    const std::size_t per_split = std::clamp<std::size_t>(config.features_per_split.value_or(d), 1, std::max<std::size_t>(d, 1));

    Rng rng = make_rng(config.seed, 0x7ee);
    DecisionTree tree;
    struct Pending {
        std::size_t node;
        std::vector<std::size_t> rows;
    };
    std::vector<Pending> stack;
    tree.nodes.push_back({});
    tree.nodes[0].counts = count_labels(y, rows);
    stack.push_back({0, rows});
    std::vector<std::size_t> features(d), order;

    while (!stack.empty()) {
        Pending cur = std::move(stack.back());
        stack.pop_back();
        auto& node = tree.nodes[cur.node];
        const ClassCounts counts = node.counts;
        const std::size_t depth = node.depth;
        const double impurity = gini(counts);

        const bool depth_ok = !config.max_depth || depth < *config.max_depth;
        if (impurity <= 0.0 || !depth_ok || cur.rows.size() < 2 * config.min_samples_leaf) continue;

        std::iota(features.begin(), features.end(), std::size_t{0});
        for (std::size_t i = d; i > 1; --i) std::swap(features[i - 1], features[uniform_index(rng, i)]);

        SplitCandidate best;
        std::size_t informative = 0;
        for (std::size_t f : features) {
            if (informative >= per_split && best.feature >= 0) break;
            if (best_split_on(x, y, cur.rows, f, counts, impurity, config.min_samples_leaf, best, order)) ++informative;
        }
        if (best.feature < 0) continue;

        std::vector<std::size_t> left_rows, right_rows;
        for (auto r : cur.rows)
            (x(static_cast<Eigen::Index>(r), best.feature) <= best.threshold ? left_rows : right_rows).push_back(r);

        const auto left = tree.nodes.size();
        tree.nodes.push_back({});
        tree.nodes.push_back({});
        auto& parent = tree.nodes[cur.node];
        parent.feature = best.feature;
        parent.threshold = best.threshold;
        parent.gain = best.gain;
        parent.left = static_cast<int>(left);
        parent.right = static_cast<int>(left + 1);
        tree.nodes[left].counts = count_labels(y, left_rows);
        tree.nodes[left].depth = depth + 1;
        tree.nodes[left + 1].counts = count_labels(y, right_rows);
        tree.nodes[left + 1].depth = depth + 1;
        // Right first so the left subtree is expanded next.
        stack.push_back({left + 1, std::move(right_rows)});
        stack.push_back({left, std::move(left_rows)});
    }
    return tree;
}

DecisionTree tree_fit(const Matrix& x, const Labels& y, const TreeConfig& config) {
    std::vector<std::size_t> rows(y.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return tree_fit(x, y, rows, config);
}

RandomForest forest_fit(const FeatureMatrix& x, const Labels& y, const ForestConfig& config) {
    if (config.n_trees == 0) fail(ErrorCode::invalid_argument, "n_trees must be at least 1");
    if (x.rows() == 0) fail(ErrorCode::invalid_argument, "forest needs at least one row");
    if (x.rows() != y.size())
        fail(ErrorCode::invalid_argument, fmt::format("X has {} rows but y has {} labels", x.rows(), y.size()));

    RandomForest forest;
    forest.config = config;
    forest.input_columns = x.column_names;
    const auto d = x.cols();
    forest.features_per_split =
        config.features_per_split.value_or(static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d)))));
    forest.trees.resize(config.n_trees);

    const std::size_t m = x.rows();
    parallel_for(
        config.n_trees,
        [&](std::size_t t) {
            Rng rng = make_rng(config.seed, 2 * t);
            std::vector<std::size_t> rows(m);
            if (config.bootstrap)
                for (auto& r : rows) r = uniform_index(rng, m);
            else
                std::iota(rows.begin(), rows.end(), std::size_t{0});
            TreeConfig tc;
            tc.max_depth = config.max_depth;
            tc.min_samples_leaf = config.min_samples_leaf;
            tc.features_per_split = forest.features_per_split;
            tc.seed = derive_seed(config.seed, 2 * t + 1);
            forest.trees[t] = tree_fit(x.values, y, rows, tc);
        },
        config.threads);
    return forest;
}

namespace {

void check_columns(const RandomForest& model, const FeatureMatrix& x) {
    if (x.column_names != model.input_columns)
        fail(ErrorCode::schema_mismatch, "forest input columns differ from the fitted columns");
}

}  // namespace

Labels forest_predict(const RandomForest& model, const FeatureMatrix& x) {
    check_columns(model, x);
    Labels out(x.rows());
    for (Eigen::Index r = 0; r < x.values.rows(); ++r) {
        ClassCounts votes{};
        for (const auto& tree : model.trees) votes[static_cast<std::size_t>(tree.predict(x.values.row(r)))] += 1.0;
        out[static_cast<std::size_t>(r)] = majority(votes);
    }
    return out;
}

Matrix forest_predict_proba(const RandomForest& model, const FeatureMatrix& x) {
    check_columns(model, x);
    Matrix out = Matrix::Zero(x.values.rows(), kNumClasses);
    for (Eigen::Index r = 0; r < x.values.rows(); ++r) {
        for (const auto& tree : model.trees) {
            const auto& leaf = tree.leaf_for(x.values.row(r));
            const double n = total(leaf.counts);
            for (int k = 0; k < kNumClasses; ++k) out(r, k) += leaf.counts[static_cast<std::size_t>(k)] / n;
        }
        out.row(r) /= static_cast<double>(model.trees.size());
    }
    return out;
}

}  // namespace concert
