#include <doctest.h>

#include "concert/error.hpp"
#include "concert/evaluation.hpp"
#include "concert/forest.hpp"
#include "concert/random.hpp"

#include <json.hpp>

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

Labels random_labels(std::size_t n, Rng& rng) {
    Labels y(n);
    for (auto& v : y) v = static_cast<int>(uniform_index(rng, 5));
    return y;
}

}  // namespace

TEST_CASE("accuracy") {
    CHECK(accuracy({0, 1, 2}, {0, 1, 2}) == 1.0);
    CHECK(accuracy({0, 1, 2, 3}, {0, 1, 0, 0}) == 0.5);
    CHECK_THROWS_AS(accuracy({0, 1}, {0}), Error);
    CHECK_THROWS_AS(accuracy({}, {}), Error);
}

TEST_CASE("confusion") {
    SUBCASE("direct tabulation") {
        const ConfusionMatrix cm = confusion({0, 0, 1}, {0, 1, 1});
        CHECK(cm.counts[0] == std::array<std::size_t, 5>{1, 1, 0, 0, 0});
        CHECK(cm.counts[1] == std::array<std::size_t, 5>{0, 1, 0, 0, 0});
        CHECK(cm.normalized[0][0] == 0.5);
        CHECK_FALSE(cm.supported[2]);
        CHECK(cm.normalized[2] == std::array<double, 5>{});
    }
    SUBCASE("perfect predictions") {
        const Labels y{0, 1, 2, 2, 4};
        const ConfusionMatrix cm = confusion(y, y);
        for (int r = 0; r < 5; ++r)
            for (int c = 0; c < 5; ++c)
                if (r != c) CHECK(cm.counts[r][c] == 0);
        CHECK(cm.normalized[2][2] == 1.0);
        CHECK_FALSE(cm.supported[3]);
    }
    SUBCASE("identities on random labels") {
        Rng rng = make_rng(1, 0);
        for (int t = 0; t < 100; ++t) {
            const std::size_t n = 1 + uniform_index(rng, 60);
            const Labels y = random_labels(n, rng), p = random_labels(n, rng);
            const ConfusionMatrix cm = confusion(y, p);
            CHECK(cm.total() == n);
            CHECK(static_cast<double>(cm.trace()) / static_cast<double>(n) == doctest::Approx(accuracy(y, p)));
            for (int r = 0; r < 5; ++r) {
                double sum = 0;
                for (double v : cm.normalized[r]) sum += v;
                if (cm.supported[r]) CHECK(std::abs(sum - 1.0) < 1e-12);
                else CHECK(sum == 0.0);
            }
        }
    }
    CHECK_THROWS_AS(confusion({0, 5}, {0, 1}), Error);
    CHECK(confusion_csv(confusion({0}, {0}), false).find('\n') != std::string::npos);
}

TEST_CASE("constant baseline") {
    CHECK(constant_baseline(Eigen::Vector2d(1, 3)).value == 2.0);
    const ConstantBaseline c = constant_baseline(Eigen::Vector3d(4, 4, 4));
    CHECK(c.predict(3) == Eigen::Vector3d(4, 4, 4));
    const ConstantBaseline logged = constant_baseline(Eigen::Vector2d(5.08, 5.08), true);
    REQUIRE(logged.price_scale.has_value());
    CHECK(std::abs(*logged.price_scale - 160.774) < 1e-3);
    CHECK(*constant_baseline(Eigen::Vector2d(5.0801, 5.0801), true).price_scale == doctest::Approx(std::exp(5.0801)));
    CHECK_THROWS_AS(constant_baseline(Vector(0)), Error);
}

TEST_CASE("random guess lower bound") {
    const RandomGuessClassifier guess = random_guess_baseline(5, 42);
    Rng rng = make_rng(2, 0);
    const Labels truth = random_labels(10000, rng);
    CHECK(std::abs(accuracy(truth, guess.predict(10000)) - 0.2) <= 0.02);
    CHECK(guess.expected_accuracy() == 0.2);
    CHECK(guess.predict(50) == random_guess_baseline(5, 42).predict(50));
    CHECK_THROWS_AS(random_guess_baseline(1, 0), Error);
}

TEST_CASE("overfit upper bound") {
    Rng rng = make_rng(3, 0);
    Matrix x(150, 3);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = uniform01(rng);
    const Labels y = random_labels(150, rng);
    CHECK(overfit_upper_bound(ModelFamily::forest, matrix(x), y, 1) == 1.0);
    CHECK(overfit_upper_bound(ModelFamily::logistic, matrix(x), y, 1) < 1.0);
    try {
        overfit_upper_bound(ModelFamily::sgd, matrix(x), y, 1);
        FAIL("expected unsupported");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::unsupported);
    }
}

TEST_CASE("model family names") {
    for (auto f : {ModelFamily::sgd, ModelFamily::svr, ModelFamily::logistic, ModelFamily::svc, ModelFamily::forest,
                   ModelFamily::mlp})
        CHECK(model_family_from_string(to_string(f)) == f);
    CHECK(model_family_from_string("rf") == ModelFamily::forest);
    CHECK_THROWS_AS(model_family_from_string("boosting"), Error);
    CHECK(is_classifier(ModelFamily::svc));
    CHECK_FALSE(is_classifier(ModelFamily::svr));
}

TEST_CASE("report") {
    BenchmarkReport report;
    report.task = Task::location;
    ClassificationScores s;
    s.model = "forest";
    s.test_accuracy = 1.0;
    s.lower_bound = 0.2;
    s.improvement_ratio = s.test_accuracy / s.lower_bound;
    report.classifiers.push_back(s);
    CHECK(s.improvement_ratio == doctest::Approx(5.0));
    const auto j = nlohmann::json::parse(report_json(report));
    CHECK(j.dump().find("forest") != std::string::npos);
    CHECK(report_table(report).find("forest") != std::string::npos);
}

TEST_CASE("synthetic generator") {
    SyntheticSpec spec;
    spec.rows = 400;
    spec.seed = 5;
    const SyntheticData a = generate_synthetic(spec), b = generate_synthetic(spec);
    CHECK(to_csv(a.concerts) == to_csv(b.concerts));
    CHECK(to_csv(a.cities) == to_csv(b.cities));
    CHECK(a.concerts.columns == schema::concert_columns());
    for (std::size_t r = 0; r < a.concerts.row_count(); ++r) CHECK(validate(concert_from_row(a.concerts, r)).empty());

    SUBCASE("noise 0 is realizable by a depth-4 tree") {
        spec.label_noise = 0.0;
        spec.rows = 1000;
        const SyntheticData d = generate_synthetic(spec);
        const Vector pop = numeric_column(d.concerts, schema::kPopularity);
        for (std::size_t i = 0; i < d.labels.size(); ++i)
            CHECK(planted_class(pop(static_cast<Eigen::Index>(i))) == d.labels[i]);
        const Matrix x = pop;
        const SplitIndices split = split_indices(d.labels.size(), {0.2, 1});
        TreeConfig cfg;
        cfg.max_depth = 4;
        const DecisionTree tree = tree_fit(x, d.labels, split.train, cfg);
        std::size_t correct = 0;
        for (auto i : split.test) correct += tree.predict(x.row(static_cast<Eigen::Index>(i))) == d.labels[i];
        CHECK(correct == split.test.size());
    }
    SUBCASE("noise 0.5 caps the planted rule near one half") {
        spec.label_noise = 0.5;
        spec.rows = 4000;
        spec.seed = 77;
        const SyntheticData d = generate_synthetic(spec);
        const Vector pop = numeric_column(d.concerts, schema::kPopularity);
        Labels rule;
        for (Eigen::Index i = 0; i < pop.size(); ++i) rule.push_back(planted_class(pop(i)));
        CHECK(std::abs(accuracy(d.labels, rule) - 0.5) < 0.03);
    }
    SUBCASE("invalid spec") {
        spec.label_noise = 1.5;
        CHECK_THROWS_AS(generate_synthetic(spec), Error);
    }
}
