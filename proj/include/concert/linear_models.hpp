#pragma once

#include "concert/data_model.hpp"
#include "concert/preprocess.hpp"
#include "concert/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace concert {

enum class Penalty { l1, l2 };

std::string_view to_string(Penalty penalty) noexcept;
Penalty penalty_from_string(std::string_view text);

/// Root mean squared percentage error. Throws when any target is zero.
double rmspe(const Vector& y, const Vector& predicted);

/// Monomial expansion. Degree 0 is a single constant column, degree 1 the
/// input itself; higher degrees add every monomial up to `degree` over the
/// non-dummy columns, and dummies only enter pairwise cross terms.
FeatureMatrix poly_expand(const FeatureMatrix& x, int degree);

inline constexpr int kMaxPolyDegree = 3;

struct SgdConfig {
    Penalty penalty = Penalty::l2;
    double alpha = 0.1;
    int degree = 0;
    double eta0 = 0.01;
    std::size_t epochs = 50;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
};

/// Linear model f(x) = w . phi(x) + w0 fitted under the squared percentage
/// error with an L1 or L2 penalty on w.
struct SgdRegressor {
    SgdConfig config;
    Vector weights;
    double intercept = 0.0;
    std::vector<std::string> input_columns;
    std::vector<std::string> expanded_columns;
    double train_rmspe = 0.0;
    std::vector<double> loss_history;  // objective after each epoch

    Vector predict(const FeatureMatrix& x) const;
};

/// Mean squared percentage error of (w, w0) plus alpha*||w||_1 or alpha*||w||_2^2.
double mspe_objective(const Matrix& x, const Vector& y, const Vector& w, double w0, Penalty penalty, double alpha);

struct LinearGradient {
    Vector weights;
    double intercept = 0.0;
};

/// Gradient of the smooth part of mspe_objective: the data term plus, for
/// L2, the penalty. L1 is handled by soft-thresholding during fitting.
LinearGradient mspe_gradient(const Matrix& x, const Vector& y, const Vector& w, double w0, Penalty penalty,
                             double alpha);

/// Mini-batch proximal SGD with rate eta0 / (1 + eta0 * alpha * t).
/// Throws diverged (naming the learning rate) on a non-finite objective.
SgdRegressor sgd_fit(const FeatureMatrix& x, const Vector& y, const SgdConfig& config);

enum class LogisticMode { one_vs_rest, multinomial };

std::string_view to_string(LogisticMode mode) noexcept;
LogisticMode logistic_mode_from_string(std::string_view text);

struct LogisticConfig {
    double C = 0.1;
    Penalty penalty = Penalty::l1;
    LogisticMode mode = LogisticMode::multinomial;
    std::optional<std::size_t> pca_components;
    double learning_rate = 0.1;
    std::size_t epochs = 100;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
};

/// Five-class logistic regression. The training objective is the summed
/// cross-entropy plus (1/C) times the penalty on the weights (biases are
/// not penalized).
struct LogisticModel {
    LogisticConfig config;
    Matrix weights;  // kNumClasses x d
    Vector bias;     // kNumClasses
    std::optional<PcaState> pca;
    std::vector<std::string> input_columns;
};

LogisticModel logistic_fit(const FeatureMatrix& x, const Labels& y, const LogisticConfig& config);
/// M x 5 rows summing to one. One-vs-rest scores are normalized sigmoids.
Matrix logistic_predict_proba(const LogisticModel& model, const FeatureMatrix& x);
Labels logistic_predict(const LogisticModel& model, const FeatureMatrix& x);

/// Probabilities from raw scores (already projected features).
Matrix logistic_scores_to_proba(const Matrix& scores, LogisticMode mode);

/// Row-wise argmax; ties go to the lowest column.
Labels argmax_rows(const Matrix& scores);

}  // namespace concert
