#pragma once

#include "concert/data_model.hpp"
#include "concert/types.hpp"

#include <array>
#include <cstdint>
#include <list>
#include <span>
#include <unordered_map>
#include <vector>

namespace concert {

/// exp(-gamma * ||x - z||^2). Throws on dimension mismatch or negative gamma.
double rbf_eval(const Vector& x, const Vector& z, double gamma);

/// Rows of the RBF Gram matrix over a fixed point set. The full matrix is
/// precomputed below `full_threshold` rows; above it rows are computed on
/// demand and kept in an LRU cache. Not thread-safe.
class KernelCache {
public:
    KernelCache(const Matrix& points, double gamma, std::size_t full_threshold = 2000,
                std::size_t cache_megabytes = 256);

    std::span<const double> row(std::size_t i);
    std::size_t size() const noexcept { return n_; }
    bool is_full() const noexcept { return !full_.empty(); }

private:
    void compute_row(std::size_t i, double* out) const;

    const Matrix& points_;
    Vector squared_norms_;
    double gamma_;
    std::size_t n_;
    std::vector<double> full_;
    std::size_t capacity_ = 0;
    std::list<std::size_t> lru_;
    std::unordered_map<std::size_t, std::pair<std::vector<double>, std::list<std::size_t>::iterator>> cache_;
};

/// Box-constrained dual in the standard minimization form
///   min 1/2 a^T Q a + p^T a   s.t.  y^T a = 0,  0 <= a_t <= C,
/// with Q_st = y_s y_t K(base_s, base_t) and y_t in {-1, +1}.
struct SmoProblem {
    std::vector<double> p;
    std::vector<int> y;
    std::vector<std::size_t> base;
    double C = 1.0;
};

struct SmoSettings {
    double tolerance = 1e-3;
    std::size_t max_passes = 10000;  // iteration budget = max_passes * problem size
    bool record_objective = false;
};

struct SmoResult {
    std::vector<double> alpha;
    double rho = 0.0;  // decision = sum_t y_t a_t K(x_t, x) - rho
    std::size_t iterations = 0;
    double violation = 0.0;  // final maximal KKT violation (m - M)
    double objective = 0.0;  // minimization objective at the solution
    std::vector<double> objective_history;  // per iteration when recorded
};

/// Pairwise coordinate descent on the maximal violating pair. Throws
/// convergence with the final violation when the budget runs out.
SmoResult smo_solve(const SmoProblem& problem, KernelCache& kernel, const SmoSettings& settings);

struct SvrConfig {
    double C = 0.5;
    double gamma = 0.01;
    double epsilon = 2.0;
    SmoSettings smo;
};

/// Epsilon-insensitive support vector regression, f(x) = sum b_i K(x_i, x) + w0.
struct SvrModel {
    SvrConfig config;
    Matrix support_vectors;
    Vector coefficients;  // beta_i = alpha_i - alpha_i', in [-C, C]
    double intercept = 0.0;
    std::vector<std::string> input_columns;

    // Fit diagnostics.
    std::vector<double> beta;  // one entry per training row
    double slack_upper = 0.0;  // sum of xi
    double slack_lower = 0.0;  // sum of xi'
    double dual_objective = 0.0;
    std::size_t iterations = 0;
    double violation = 0.0;

    Vector predict(const FeatureMatrix& x) const;
};

SvrModel svr_fit(const FeatureMatrix& x, const Vector& y, const SvrConfig& config);

/// -1/2 b^T K b - eps ||b||_1 + y^T b, the SVR dual in beta form.
double svr_dual_objective(const Matrix& gram, const Vector& y, const Vector& beta, double epsilon);
/// sum a - 1/2 sum_ij y_i y_j a_i a_j K_ij.
double svc_dual_objective(const Matrix& gram, const std::vector<int>& y, const Vector& alpha);

struct SvcConfig {
    double C = 10.0;
    double gamma = 0.01;
    SmoSettings smo;
};

/// One binary machine, f(x) = sum a_i y_i K(x_i, x) + w0.
struct BinarySvc {
    bool trained = false;  // false when the class is absent from training data
    Matrix support_vectors;
    Vector coefficients;  // a_i * y_i
    double intercept = 0.0;

    // Fit diagnostics over all training rows.
    std::vector<double> alpha;
    std::vector<int> labels;
    double dual_objective = 0.0;
    std::size_t iterations = 0;
    double violation = 0.0;

    double decision(const Eigen::Ref<const Eigen::RowVectorXd>& x, double gamma) const;
};

BinarySvc svc_fit_binary(const Matrix& x, const std::vector<int>& y_pm1, const SvcConfig& config);

struct SvcModel {
    SvcConfig config;
    std::array<BinarySvc, kNumClasses> machines;
    std::vector<std::string> input_columns;

    /// M x 5 decision values; untrained machines score -infinity.
    Matrix decision_values(const FeatureMatrix& x) const;
};

SvcModel svc_fit(const FeatureMatrix& x, const Labels& y, const SvcConfig& config, unsigned threads = 0);
/// Argmax of the one-vs-rest decision values, ties to the lowest class.
Labels svc_predict(const SvcModel& model, const FeatureMatrix& x);

}  // namespace concert
