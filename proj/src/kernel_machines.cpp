#include "concert/kernel_machines.hpp"

#include "concert/error.hpp"
#include "concert/random.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace concert {

double rbf_eval(const Vector& x, const Vector& z, double gamma) {
    if (x.size() != z.size())
        fail(ErrorCode::invalid_argument, fmt::format("rbf: dimension mismatch {} vs {}", x.size(), z.size()));
    if (gamma < 0.0) fail(ErrorCode::invalid_argument, fmt::format("rbf: gamma {} is negative", gamma));
    return std::exp(-gamma * (x - z).squaredNorm());
}

KernelCache::KernelCache(const Matrix& points, double gamma, std::size_t full_threshold, std::size_t cache_megabytes)
    : points_(points), gamma_(gamma), n_(static_cast<std::size_t>(points.rows())) {
    squared_norms_ = points.rowwise().squaredNorm();
    if (n_ < full_threshold) {
        full_.resize(n_ * n_);
        for (std::size_t i = 0; i < n_; ++i) compute_row(i, full_.data() + i * n_);
    } else {
        capacity_ = std::max<std::size_t>(2, cache_megabytes * (1u << 20) / (sizeof(double) * std::max<std::size_t>(n_, 1)));
    }
}

void KernelCache::compute_row(std::size_t i, double* out) const {
    const auto ii = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < n_; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        if (j == i) {
            out[j] = 1.0;
            continue;
        }
        double d2 = squared_norms_(ii) + squared_norms_(jj) - 2.0 * points_.row(ii).dot(points_.row(jj));
        out[j] = std::exp(-gamma_ * std::max(0.0, d2));
    }
}

std::span<const double> KernelCache::row(std::size_t i) {
    if (!full_.empty()) return {full_.data() + i * n_, n_};
    if (auto it = cache_.find(i); it != cache_.end()) {
        lru_.splice(lru_.begin(), lru_, it->second.second);
        return {it->second.first.data(), n_};
    }
    if (cache_.size() >= capacity_) {
        cache_.erase(lru_.back());
        lru_.pop_back();
    }
    lru_.push_front(i);
    auto& entry = cache_[i];
    entry.first.resize(n_);
    entry.second = lru_.begin();
    compute_row(i, entry.first.data());
    return {entry.first.data(), n_};
}

namespace {

constexpr double kTau = 1e-12;

double minimization_objective(const std::vector<double>& alpha, const std::vector<double>& grad,
                              const std::vector<double>& p) {
    // f = 1/2 a^T Q a + p^T a and G = Q a + p, so f = 1/2 a^T (G + p).
    double f = 0.0;
    for (std::size_t t = 0; t < alpha.size(); ++t) f += alpha[t] * (grad[t] + p[t]);
    return 0.5 * f;
}

}  // namespace

SmoResult smo_solve(const SmoProblem& problem, KernelCache& kernel, const SmoSettings& settings) {
    const std::size_t n = problem.p.size();
    if (problem.y.size() != n || problem.base.size() != n)
        fail(ErrorCode::invalid_argument, "SMO problem arrays have inconsistent lengths");
    if (!(problem.C > 0.0)) fail(ErrorCode::invalid_argument, "SMO needs C > 0");
    const double C = problem.C;

    SmoResult r;
    r.alpha.assign(n, 0.0);
    std::vector<double> grad = problem.p;
    const auto& y = problem.y;
    auto& a = r.alpha;

    const auto in_up = [&](std::size_t t) { return y[t] > 0 ? a[t] < C : a[t] > 0.0; };
    const auto in_low = [&](std::size_t t) { return y[t] > 0 ? a[t] > 0.0 : a[t] < C; };

    const std::size_t budget = std::max<std::size_t>(1, settings.max_passes) * std::max<std::size_t>(n, 1);
    if (settings.record_objective) r.objective_history.push_back(0.0);

    for (;;) {
        double g_max = -std::numeric_limits<double>::infinity();
        double g_min = std::numeric_limits<double>::infinity();
        std::size_t i = n, j = n;
        for (std::size_t t = 0; t < n; ++t) {
            const double v = -y[t] * grad[t];
            if (in_up(t) && v > g_max) {
                g_max = v;
                i = t;
            }
            if (in_low(t) && v < g_min) {
                g_min = v;
                j = t;
            }
        }
        r.violation = (i == n || j == n) ? 0.0 : g_max - g_min;
        if (i == n || j == n || r.violation < settings.tolerance) break;
        if (r.iterations >= budget)
            fail(ErrorCode::convergence,
                 fmt::format("SMO did not reach tolerance {} within {} iterations; final KKT violation {}",
                             settings.tolerance, budget, r.violation));
        ++r.iterations;

        const auto row_i = kernel.row(problem.base[i]);
        const double k_ij = row_i[problem.base[j]];
        const double k_ii = row_i[problem.base[i]];
        const double k_jj = kernel.row(problem.base[j])[problem.base[j]];
        const double old_ai = a[i], old_aj = a[j];

        if (y[i] != y[j]) {
            // Q_ij = -K_ij
            double quad = k_ii + k_jj + 2.0 * k_ij;
            if (quad <= 0.0) quad = kTau;
            const double delta = (-grad[i] - grad[j]) / quad;
            const double diff = a[i] - a[j];
            a[i] += delta;
            a[j] += delta;
            if (diff > 0) {
                if (a[j] < 0) {
                    a[j] = 0;
                    a[i] = diff;
                }
            } else if (a[i] < 0) {
                a[i] = 0;
                a[j] = -diff;
            }
            if (diff > 0) {
                if (a[i] > C) {
                    a[i] = C;
                    a[j] = C - diff;
                }
            } else if (a[j] > C) {
                a[j] = C;
                a[i] = C + diff;
            }
        } else {
            double quad = k_ii + k_jj - 2.0 * k_ij;
            if (quad <= 0.0) quad = kTau;
            const double delta = (grad[i] - grad[j]) / quad;
            const double sum = a[i] + a[j];
            a[i] -= delta;
            a[j] += delta;
            if (sum > C) {
                if (a[i] > C) {
                    a[i] = C;
                    a[j] = sum - C;
                }
            } else if (a[j] < 0) {
                a[j] = 0;
                a[i] = sum;
            }
            if (sum > C) {
                if (a[j] > C) {
                    a[j] = C;
                    a[i] = sum - C;
                }
            } else if (a[i] < 0) {
                a[i] = 0;
                a[j] = sum;
            }
        }

        const double d_i = a[i] - old_ai;
        const double d_j = a[j] - old_aj;
        const auto ki = kernel.row(problem.base[i]);
        std::vector<double> ki_copy;
        if (!kernel.is_full()) ki_copy.assign(ki.begin(), ki.end());  // the next row() may evict it
        const double* ri = kernel.is_full() ? ki.data() : ki_copy.data();
        const auto rj = kernel.row(problem.base[j]);
        for (std::size_t t = 0; t < n; ++t) {
            const std::size_t bt = problem.base[t];
            grad[t] += y[t] * (y[i] * ri[bt] * d_i + y[j] * rj[bt] * d_j);
        }
        if (settings.record_objective) r.objective_history.push_back(minimization_objective(a, grad, problem.p));
    }

    // Offset from free variables, or the midpoint of the feasible interval.
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    std::size_t n_free = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const double yg = y[t] * grad[t];
        if (a[t] >= C) {
            if (y[t] < 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else if (a[t] <= 0.0) {
            if (y[t] > 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else {
            ++n_free;
            sum_free += yg;
        }
    }
    if (n_free > 0) r.rho = sum_free / static_cast<double>(n_free);
    else if (std::isfinite(ub) && std::isfinite(lb)) r.rho = 0.5 * (ub + lb);
    else r.rho = std::isfinite(ub) ? ub : (std::isfinite(lb) ? lb : 0.0);
    r.objective = minimization_objective(a, grad, problem.p);
    return r;
}

namespace {

void check_hyper(double C, double gamma) {
    if (!(C > 0.0)) fail(ErrorCode::invalid_argument, fmt::format("C must be positive, got {}", C));
    if (!(gamma > 0.0)) fail(ErrorCode::invalid_argument, fmt::format("gamma must be positive, got {}", gamma));
}

Matrix take_rows(const Matrix& x, const std::vector<std::size_t>& rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
    return out;
}

double rbf_rows(const Eigen::Ref<const Eigen::RowVectorXd>& a, const Eigen::Ref<const Eigen::RowVectorXd>& b,
                double gamma) {
    return std::exp(-gamma * (a - b).squaredNorm());
}

}  // namespace

double svr_dual_objective(const Matrix& gram, const Vector& y, const Vector& beta, double epsilon) {
    return -0.5 * beta.dot(gram * beta) - epsilon * beta.lpNorm<1>() + y.dot(beta);
}

double svc_dual_objective(const Matrix& gram, const std::vector<int>& y, const Vector& alpha) {
    Vector ya(alpha.size());
    for (Eigen::Index i = 0; i < alpha.size(); ++i) ya(i) = y[static_cast<std::size_t>(i)] * alpha(i);
    return alpha.sum() - 0.5 * ya.dot(gram * ya);
}

Vector SvrModel::predict(const FeatureMatrix& x) const {
    if (x.column_names != input_columns)
        fail(ErrorCode::schema_mismatch, "SVR input columns differ from the fitted columns");
    Vector out(x.values.rows());
    for (Eigen::Index r = 0; r < x.values.rows(); ++r) {
        double f = intercept;
        for (Eigen::Index s = 0; s < support_vectors.rows(); ++s)
            f += coefficients(s) * rbf_rows(support_vectors.row(s), x.values.row(r), config.gamma);
        out(r) = f;
    }
    return out;
}

SvrModel svr_fit(const FeatureMatrix& x, const Vector& y, const SvrConfig& config) {
    const std::size_t m = x.rows();
    if (m < 2) fail(ErrorCode::invalid_argument, "SVR needs at least 2 rows");
    if (static_cast<std::size_t>(y.size()) != m)
        fail(ErrorCode::invalid_argument, fmt::format("X has {} rows but y has {} entries", m, y.size()));
    check_hyper(config.C, config.gamma);
    if (config.epsilon < 0.0) fail(ErrorCode::invalid_argument, "epsilon must be non-negative");

    // Variables 0..m-1 are alpha (y=+1), m..2m-1 are alpha' (y=-1).
    SmoProblem problem;
    problem.C = config.C;
    problem.p.resize(2 * m);
    problem.y.resize(2 * m);
    problem.base.resize(2 * m);
    for (std::size_t i = 0; i < m; ++i) {
        const double yi = y(static_cast<Eigen::Index>(i));
        problem.p[i] = config.epsilon - yi;
        problem.p[i + m] = config.epsilon + yi;
        problem.y[i] = 1;
        problem.y[i + m] = -1;
        problem.base[i] = problem.base[i + m] = i;
    }
    KernelCache kernel(x.values, config.gamma);
    const SmoResult r = smo_solve(problem, kernel, config.smo);

    SvrModel model;
    model.config = config;
    model.input_columns = x.column_names;
    model.intercept = -r.rho;
    model.iterations = r.iterations;
    model.violation = r.violation;
    model.dual_objective = -r.objective;
    model.beta.resize(m);
    std::vector<std::size_t> support;
    for (std::size_t i = 0; i < m; ++i) {
        model.beta[i] = r.alpha[i] - r.alpha[i + m];
        if (model.beta[i] != 0.0) support.push_back(i);
    }
    model.support_vectors = take_rows(x.values, support);
    model.coefficients.resize(static_cast<Eigen::Index>(support.size()));
    for (std::size_t s = 0; s < support.size(); ++s) model.coefficients(static_cast<Eigen::Index>(s)) = model.beta[support[s]];

    const Vector fitted = model.predict(x);
    for (std::size_t i = 0; i < m; ++i) {
        const double resid = y(static_cast<Eigen::Index>(i)) - fitted(static_cast<Eigen::Index>(i));
        model.slack_upper += std::max(0.0, resid - config.epsilon);
        model.slack_lower += std::max(0.0, -resid - config.epsilon);
    }
    return model;
}

double BinarySvc::decision(const Eigen::Ref<const Eigen::RowVectorXd>& x, double gamma) const {
    if (!trained) return -std::numeric_limits<double>::infinity();
    double f = intercept;
    for (Eigen::Index s = 0; s < support_vectors.rows(); ++s)
        f += coefficients(s) * rbf_rows(support_vectors.row(s), x, gamma);
    return f;
}

namespace {

BinarySvc fit_binary(const Matrix& x, const std::vector<int>& y, const SvcConfig& config, KernelCache& kernel) {
    BinarySvc machine;
    machine.labels = y;
    const std::size_t m = y.size();
    const bool has_pos = std::find(y.begin(), y.end(), 1) != y.end();
    const bool has_neg = std::find(y.begin(), y.end(), -1) != y.end();
    if (!has_pos || !has_neg) {
        machine.alpha.assign(m, 0.0);
        return machine;
    }
    SmoProblem problem;
    problem.C = config.C;
    problem.p.assign(m, -1.0);
    problem.y = y;
    problem.base.resize(m);
    for (std::size_t i = 0; i < m; ++i) problem.base[i] = i;
    const SmoResult r = smo_solve(problem, kernel, config.smo);

    machine.trained = true;
    machine.alpha = r.alpha;
    machine.intercept = -r.rho;
    machine.dual_objective = -r.objective;
    machine.iterations = r.iterations;
    machine.violation = r.violation;
    std::vector<std::size_t> support;
    for (std::size_t i = 0; i < m; ++i)
        if (r.alpha[i] != 0.0) support.push_back(i);
    machine.support_vectors = take_rows(x, support);
    machine.coefficients.resize(static_cast<Eigen::Index>(support.size()));
    for (std::size_t s = 0; s < support.size(); ++s)
        machine.coefficients(static_cast<Eigen::Index>(s)) = r.alpha[support[s]] * y[support[s]];
    return machine;
}

}  // namespace

BinarySvc svc_fit_binary(const Matrix& x, const std::vector<int>& y_pm1, const SvcConfig& config) {
    check_hyper(config.C, config.gamma);
    if (static_cast<std::size_t>(x.rows()) != y_pm1.size())
        fail(ErrorCode::invalid_argument, "X rows and label count differ");
    for (int v : y_pm1)
        if (v != 1 && v != -1) fail(ErrorCode::invalid_argument, "binary SVC labels must be -1 or +1");
    KernelCache kernel(x, config.gamma);
    return fit_binary(x, y_pm1, config, kernel);
}

SvcModel svc_fit(const FeatureMatrix& x, const Labels& y, const SvcConfig& config, unsigned threads) {
    check_hyper(config.C, config.gamma);
    if (x.rows() != y.size())
        fail(ErrorCode::invalid_argument, fmt::format("X has {} rows but y has {} labels", x.rows(), y.size()));
    std::set<int> present;
    for (int label : y) {
        if (label < 0 || label >= kNumClasses)
            fail(ErrorCode::invalid_argument, fmt::format("label {} outside 0..4", label));
        present.insert(label);
    }
    if (present.size() < 2) fail(ErrorCode::invalid_argument, "SVC needs at least two classes");

    SvcModel model;
    model.config = config;
    model.input_columns = x.column_names;
    KernelCache kernel(x.values, config.gamma);
    auto fit_class = [&](std::size_t k) {
        std::vector<int> yk(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) yk[i] = y[i] == static_cast<int>(k) ? 1 : -1;
        model.machines[k] = fit_binary(x.values, yk, config, kernel);
    };
    // A precomputed Gram matrix is read-only and can be shared across workers.
    if (kernel.is_full()) parallel_for(kNumClasses, fit_class, threads);
    else
        for (std::size_t k = 0; k < kNumClasses; ++k) fit_class(k);
    return model;
}

Matrix SvcModel::decision_values(const FeatureMatrix& x) const {
    if (x.column_names != input_columns)
        fail(ErrorCode::schema_mismatch, "SVC input columns differ from the fitted columns");
    Matrix out(x.values.rows(), kNumClasses);
    for (Eigen::Index r = 0; r < x.values.rows(); ++r)
        for (int k = 0; k < kNumClasses; ++k) out(r, k) = machines[static_cast<std::size_t>(k)].decision(x.values.row(r), config.gamma);
    return out;
}

Labels svc_predict(const SvcModel& model, const FeatureMatrix& x) {
    const Matrix d = model.decision_values(x);
    Labels out(static_cast<std::size_t>(d.rows()));
    for (Eigen::Index r = 0; r < d.rows(); ++r) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < d.cols(); ++c)
            if (d(r, c) > d(r, best)) best = c;
        out[static_cast<std::size_t>(r)] = static_cast<int>(best);
    }
    return out;
}

}  // namespace concert
