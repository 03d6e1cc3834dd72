#include <doctest.h>

#include "concert/error.hpp"
#include "concert/forest.hpp"
#include "concert/random.hpp"

#include <cmath>

using namespace concert;

namespace {

FeatureMatrix matrix(const Matrix& values) {
    FeatureMatrix x;
    x.values = values;
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
        x.column_names.push_back("f" + std::to_string(c));
        x.column_kinds.push_back(ColumnKind::continuous);
    }
    return x;
}

struct Data {
    Matrix x;
    Labels y;
};

Data noisy(std::size_t rows, std::uint64_t seed) {
    Rng rng = make_rng(seed, 0);
    Data d{Matrix(rows, 4), {}};
    for (Eigen::Index i = 0; i < d.x.size(); ++i) d.x.data()[i] = uniform01(rng);
    for (std::size_t i = 0; i < rows; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        int label = static_cast<int>(d.x(r, 0) * 5);
        if (uniform01(rng) < 0.2) label = static_cast<int>(uniform_index(rng, 5));
        d.y.push_back(label);
    }
    return d;
}

void check_structure(const DecisionTree& tree, const Matrix& x, const Labels& y, const std::vector<std::size_t>& rows,
                     const TreeConfig& cfg) {
    for (const auto& node : tree.nodes) {
        if (cfg.max_depth) CHECK(node.depth <= *cfg.max_depth);
        double count = 0;
        for (double c : node.counts) count += c;
        if (node.feature < 0) CHECK(count >= static_cast<double>(cfg.min_samples_leaf));
        else CHECK(node.gain > 0.0);
    }
    // Leaf counts agree with routing the training rows.
    std::vector<ClassCounts> routed(tree.nodes.size(), ClassCounts{});
    for (auto r : rows) {
        const auto* leaf = &tree.leaf_for(x.row(static_cast<Eigen::Index>(r)));
        routed[static_cast<std::size_t>(leaf - tree.nodes.data())][static_cast<std::size_t>(y[r])] += 1;
    }
    for (std::size_t n = 0; n < tree.nodes.size(); ++n)
        if (tree.nodes[n].feature < 0) CHECK(routed[n] == tree.nodes[n].counts);
}

}  // namespace

TEST_CASE("gini") {
    CHECK(gini(Labels{2, 2, 2}) == 0.0);
    CHECK(gini(Labels{0, 1}) == doctest::Approx(0.5));
    CHECK(gini(Labels{0, 1, 2, 3, 4}) == doctest::Approx(1.0 - 5 * 0.04));
    CHECK_THROWS_AS(gini(Labels{}), Error);
}

TEST_CASE("tree examples") {
    SUBCASE("one separating feature") {
        Matrix x(6, 1);
        x << 0.1, 0.2, 0.3, 0.7, 0.8, 0.9;
        const Labels y{0, 0, 0, 1, 1, 1};
        const DecisionTree t = tree_fit(x, y, TreeConfig{});
        CHECK(t.depth() == 1);
        CHECK(t.nodes[0].threshold > 0.3);
        CHECK(t.nodes[0].threshold < 0.7);
    }
    SUBCASE("min_samples_leaf equal to M gives one majority leaf") {
        Matrix x(5, 1);
        x << 1, 2, 3, 4, 5;
        TreeConfig cfg;
        cfg.min_samples_leaf = 5;
        const DecisionTree t = tree_fit(x, {1, 1, 4, 1, 4}, cfg);
        CHECK(t.nodes.size() == 1);
        CHECK(t.predict(x.row(2)) == 1);
    }
    SUBCASE("pure labels") {
        Matrix x(4, 2);
        x.setRandom();
        CHECK(tree_fit(x, {3, 3, 3, 3}, TreeConfig{}).nodes.size() == 1);
    }
}

TEST_CASE("tree structure invariants on noisy data") {
    const Data d = noisy(300, 1);
    std::vector<std::size_t> rows(300);
    for (std::size_t i = 0; i < 300; ++i) rows[i] = i;
    for (std::size_t depth : {2, 5, 40}) {
        for (std::size_t leaf : {1, 5, 20}) {
            TreeConfig cfg;
            cfg.max_depth = depth;
            cfg.min_samples_leaf = leaf;
            cfg.features_per_split = 2;
            cfg.seed = depth * 100 + leaf;
            check_structure(tree_fit(d.x, d.y, cfg), d.x, d.y, rows, cfg);
        }
    }
}

TEST_CASE("forest") {
    const Data d = noisy(200, 2);
    const FeatureMatrix x = matrix(d.x);

    SUBCASE("single unrestricted tree memorizes distinct rows") {
        ForestConfig cfg;
        cfg.n_trees = 1;
        cfg.bootstrap = false;
        cfg.min_samples_leaf = 1;
        cfg.max_depth.reset();
        cfg.features_per_split = 4;
        CHECK(forest_predict(forest_fit(x, d.y, cfg), x) == d.y);
    }
    SUBCASE("clones vote like one tree") {
        ForestConfig cfg;
        cfg.n_trees = 7;
        cfg.bootstrap = false;
        cfg.features_per_split = 4;
        const RandomForest forest = forest_fit(x, d.y, cfg);
        cfg.n_trees = 1;
        const RandomForest single = forest_fit(x, d.y, cfg);
        CHECK(forest_predict(forest, x) == forest_predict(single, x));
    }
    SUBCASE("reference defaults, proba rows and determinism") {
        ForestConfig cfg;
        cfg.n_trees = 15;
        cfg.seed = 3;
        CHECK(ForestConfig{}.n_trees == 105);
        CHECK(*ForestConfig{}.max_depth == 47);
        CHECK(ForestConfig{}.min_samples_leaf == 10);
        const RandomForest a = forest_fit(x, d.y, cfg);
        CHECK(a.trees.size() == 15);
        CHECK(a.features_per_split == 2);
        const Matrix p = forest_predict_proba(a, x);
        CHECK((p.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-9);
        cfg.threads = 1;
        const RandomForest b = forest_fit(x, d.y, cfg);
        REQUIRE(b.trees.size() == a.trees.size());
        for (std::size_t t = 0; t < a.trees.size(); ++t) {
            REQUIRE(a.trees[t].nodes.size() == b.trees[t].nodes.size());
            for (std::size_t n = 0; n < a.trees[t].nodes.size(); ++n) {
                CHECK(a.trees[t].nodes[n].feature == b.trees[t].nodes[n].feature);
                CHECK(a.trees[t].nodes[n].threshold == b.trees[t].nodes[n].threshold);
            }
        }
    }
    SUBCASE("zero trees") {
        ForestConfig cfg;
        cfg.n_trees = 0;
        CHECK_THROWS_AS(forest_fit(x, d.y, cfg), Error);
    }
}
