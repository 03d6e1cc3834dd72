#pragma once

#include "concert/data_model.hpp"
#include "concert/types.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace concert {

double accuracy(const Labels& y, const Labels& predicted);

struct ConfusionMatrix {
    std::array<std::array<std::size_t, kNumClasses>, kNumClasses> counts{};  // rows = true class
    std::array<std::array<double, kNumClasses>, kNumClasses> normalized{};
    std::array<bool, kNumClasses> supported{};  // false for rows with no examples (left all zero)

    std::size_t total() const;
    std::size_t trace() const;
};

ConfusionMatrix confusion(const Labels& y, const Labels& predicted);
std::string confusion_csv(const ConfusionMatrix& cm, bool normalized);

struct ConstantBaseline {
    double value = 0.0;                // on the modeling scale
    std::optional<double> price_scale;  // exp(value) when the targets are log prices

    Vector predict(std::size_t rows) const { return Vector::Constant(static_cast<Eigen::Index>(rows), value); }
};

ConstantBaseline constant_baseline(const Vector& y_train, bool log_targets = false);

struct RandomGuessClassifier {
    int n_classes = kNumClasses;
    std::uint64_t seed = 0;

    /// Uniform labels; the i-th label depends only on the seed and i.
    Labels predict(std::size_t rows) const;
    double expected_accuracy() const { return 1.0 / n_classes; }
};

RandomGuessClassifier random_guess_baseline(int n_classes, std::uint64_t seed);

enum class ModelFamily { sgd, svr, logistic, svc, forest, mlp };

std::string_view to_string(ModelFamily family) noexcept;
ModelFamily model_family_from_string(std::string_view text);
bool is_classifier(ModelFamily family) noexcept;

/// Training accuracy of the family fitted at its memorization settings.
/// Regressors have no such preset and throw unsupported.
double overfit_upper_bound(ModelFamily family, const FeatureMatrix& x, const Labels& y, std::uint64_t seed);

struct ClassificationScores {
    std::string model;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    double lower_bound = 0.0;  // expected accuracy of uniform guessing
    double random_guess_test_accuracy = 0.0;
    std::optional<double> upper_bound;
    double improvement_ratio = 0.0;  // test accuracy / lower bound
    ConfusionMatrix test_confusion;
};

struct RegressionScores {
    std::string model;
    double train_rmspe = 0.0;  // modeling (log) scale
    double test_rmspe = 0.0;
    double train_rmspe_price = 0.0;  // after mapping back to prices
    double test_rmspe_price = 0.0;
};

struct ConstantScores {
    double value = 0.0;
    std::optional<double> price_value;
    std::optional<double> full_set_price_value;
    double train_rmspe = 0.0;
    double test_rmspe = 0.0;
    double test_rmspe_price = 0.0;
};

struct BenchmarkReport {
    Task task = Task::location;
    std::uint64_t seed = 0;
    std::size_t train_rows = 0;
    std::size_t test_rows = 0;
    std::vector<ClassificationScores> classifiers;
    std::vector<RegressionScores> regressors;
    std::optional<ConstantScores> constant;
};

std::string report_json(const BenchmarkReport& report);
/// Fixed-width table with one row per model.
std::string report_table(const BenchmarkReport& report);

struct SyntheticSpec {
    std::size_t rows = 2000;
    double label_noise = 0.2;     // probability of replacing the class with another one
    double price_signal = 0.0;    // 0 gives prices with no learnable structure
    double log_price_mean = 5.08;
    double log_price_sd = 0.65;
    std::size_t cities_per_class = 8;
    std::array<double, kNumClasses> class_weights{0.3, 0.25, 0.2, 0.15, 0.1};
    std::uint64_t seed = 0;
};

struct SyntheticData {
    RawTable concerts;
    RawTable cities;
    Labels planted;  // class before label noise
    Labels labels;   // Class column
    Vector log_price;
};

/// Concert rows following the snapshot schema. Class k concerts have
/// popularity in [0.2k, 0.2k + 0.19] and live in cities of cluster k, whose
/// income and density increase with k.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

/// The planted rule: class recovered from concert popularity alone.
int planted_class(double concert_popularity);

}  // namespace concert
