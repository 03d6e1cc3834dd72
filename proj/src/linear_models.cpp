#include "concert/linear_models.hpp"

#include "concert/error.hpp"
#include "concert/random.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace concert {

std::string_view to_string(Penalty penalty) noexcept { return penalty == Penalty::l1 ? "l1" : "l2"; }

Penalty penalty_from_string(std::string_view text) {
    if (text == "l1" || text == "L1") return Penalty::l1;
    if (text == "l2" || text == "L2") return Penalty::l2;
    fail(ErrorCode::invalid_argument, fmt::format("unknown penalty '{}'", text));
}

std::string_view to_string(LogisticMode mode) noexcept {
    return mode == LogisticMode::one_vs_rest ? "ovr" : "multinomial";
}

LogisticMode logistic_mode_from_string(std::string_view text) {
    if (text == "ovr" || text == "one_vs_rest") return LogisticMode::one_vs_rest;
    if (text == "multinomial") return LogisticMode::multinomial;
    fail(ErrorCode::invalid_argument, fmt::format("unknown logistic mode '{}'", text));
}

double rmspe(const Vector& y, const Vector& predicted) {
    if (y.size() != predicted.size())
        fail(ErrorCode::invalid_argument,
             fmt::format("rmspe: {} targets but {} predictions", y.size(), predicted.size()));
    if (y.size() == 0) fail(ErrorCode::invalid_argument, "rmspe of an empty sample");
    double sum = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (y(i) == 0.0) fail(ErrorCode::invalid_argument, fmt::format("rmspe: target {} is zero", i));
        const double r = (y(i) - predicted(i)) / y(i);
        sum += r * r;
    }
    return std::sqrt(sum / static_cast<double>(y.size()));
}

namespace {

// Nondecreasing index tuples of a given length; dummy columns never repeat.
void enumerate_monomials(const std::vector<std::size_t>& pool, const std::vector<ColumnKind>& kinds,
                         std::size_t length, std::vector<std::size_t>& current, std::size_t start,
                         std::vector<std::vector<std::size_t>>& out) {
    if (current.size() == length) {
        out.push_back(current);
        return;
    }
    for (std::size_t p = start; p < pool.size(); ++p) {
        const std::size_t col = pool[p];
        if (!current.empty() && current.back() == col && kinds[col] == ColumnKind::dummy) continue;
        current.push_back(col);
        enumerate_monomials(pool, kinds, length, current, p, out);
        current.pop_back();
    }
}

std::string monomial_name(const std::vector<std::size_t>& term, const std::vector<std::string>& names) {
    std::string out;
    for (std::size_t i = 0; i < term.size();) {
        std::size_t j = i;
        while (j < term.size() && term[j] == term[i]) ++j;
        if (!out.empty()) out += '*';
        out += names[term[i]];
        if (j - i > 1) out += fmt::format("^{}", j - i);
        i = j;
    }
    return out;
}

}  // namespace

FeatureMatrix poly_expand(const FeatureMatrix& x, int degree) {
    if (degree < 0) fail(ErrorCode::invalid_argument, fmt::format("polynomial degree {} is negative", degree));
    if (degree > kMaxPolyDegree)
        fail(ErrorCode::invalid_argument,
             fmt::format("polynomial degree {} exceeds the maximum of {}", degree, kMaxPolyDegree));
    if (degree == 1) return x;

    FeatureMatrix out;
    const auto m = x.values.rows();
    if (degree == 0) {
        out.values = Matrix::Ones(m, 1);
        out.column_names = {"1"};
        out.column_kinds = {ColumnKind::continuous};
        return out;
    }

    std::vector<std::vector<std::size_t>> terms;
    std::vector<std::size_t> all(x.cols());
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::vector<std::size_t> non_dummy;
    for (std::size_t j = 0; j < x.cols(); ++j)
        if (x.column_kinds[j] != ColumnKind::dummy) non_dummy.push_back(j);

    std::vector<std::size_t> current;
    for (std::size_t len = 1; len <= static_cast<std::size_t>(degree); ++len)
        enumerate_monomials(len <= 2 ? all : non_dummy, x.column_kinds, len, current, 0, terms);

    out.values.resize(m, static_cast<Eigen::Index>(terms.size() + 1));
    out.values.col(0).setOnes();
    out.column_names.push_back("1");
    out.column_kinds.push_back(ColumnKind::continuous);
    for (std::size_t t = 0; t < terms.size(); ++t) {
        const auto c = static_cast<Eigen::Index>(t + 1);
        out.values.col(c).setOnes();
        bool binary = true;
        for (auto j : terms[t]) {
            out.values.col(c).array() *= x.values.col(static_cast<Eigen::Index>(j)).array();
            binary = binary && x.column_kinds[j] == ColumnKind::dummy;
        }
        out.column_names.push_back(monomial_name(terms[t], x.column_names));
        out.column_kinds.push_back(binary ? ColumnKind::dummy : ColumnKind::continuous);
    }
    return out;
}

double mspe_objective(const Matrix& x, const Vector& y, const Vector& w, double w0, Penalty penalty, double alpha) {
    const Vector residual = ((y - (x * w).array().matrix() - Vector::Constant(y.size(), w0)).array() / y.array());
    double value = residual.squaredNorm() / static_cast<double>(y.size());
    value += penalty == Penalty::l1 ? alpha * w.lpNorm<1>() : alpha * w.squaredNorm();
    return value;
}

LinearGradient mspe_gradient(const Matrix& x, const Vector& y, const Vector& w, double w0, Penalty penalty,
                             double alpha) {
    const double m = static_cast<double>(y.size());
    // d/df ((y - f)/y)^2 = -2 (y - f) / y^2
    const Vector coef =
        (-2.0 / m) * ((y - x * w - Vector::Constant(y.size(), w0)).array() / y.array().square()).matrix();
    LinearGradient g;
    g.weights = x.transpose() * coef;
    g.intercept = coef.sum();
    if (penalty == Penalty::l2) g.weights += 2.0 * alpha * w;
    return g;
}

Vector SgdRegressor::predict(const FeatureMatrix& x) const {
    if (x.column_names != input_columns)
        fail(ErrorCode::schema_mismatch, "SGD regressor input columns differ from the fitted columns");
    const FeatureMatrix phi = poly_expand(x, config.degree);
    return (phi.values * weights).array() + intercept;
}

namespace {

void check_positive_targets(const Vector& y) {
    for (Eigen::Index i = 0; i < y.size(); ++i)
        if (!(y(i) > 0.0))
            fail(ErrorCode::invalid_argument, fmt::format("target {} is {}, expected strictly positive", i, y(i)));
}

std::vector<std::size_t> shuffled(std::size_t n, Rng& rng) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[uniform_index(rng, i)]);
    return perm;
}

void soft_threshold(Eigen::Ref<Vector> w, double amount) {
    for (Eigen::Index j = 0; j < w.size(); ++j) {
        const double v = w(j);
        w(j) = v > amount ? v - amount : (v < -amount ? v + amount : 0.0);
    }
}

}  // namespace

SgdRegressor sgd_fit(const FeatureMatrix& x, const Vector& y, const SgdConfig& config) {
    if (x.rows() != static_cast<std::size_t>(y.size()))
        fail(ErrorCode::invalid_argument, fmt::format("X has {} rows but y has {} entries", x.rows(), y.size()));
    if (x.rows() == 0) fail(ErrorCode::invalid_argument, "sgd_fit needs at least one row");
    check_positive_targets(y);
    if (!x.values.allFinite()) fail(ErrorCode::invalid_argument, "sgd_fit: X contains non-finite values");
    if (config.alpha < 0.0) fail(ErrorCode::invalid_argument, "alpha must be non-negative");
    if (config.epochs < 1 || config.batch_size < 1 || !(config.eta0 > 0.0))
        fail(ErrorCode::invalid_argument, "epochs, batch_size and eta0 must be positive");

    SgdRegressor model;
    model.config = config;
    model.input_columns = x.column_names;
    const FeatureMatrix phi = poly_expand(x, config.degree);
    model.expanded_columns = phi.column_names;
    model.weights = Vector::Zero(phi.values.cols());
    // Start from the constant that minimizes the squared percentage error.
    model.intercept = y.cwiseInverse().sum() / y.cwiseInverse().squaredNorm();

    Rng rng = make_rng(config.seed, 0x56d);
    const std::size_t m = x.rows();
    std::size_t step = 0;
    Matrix batch_x;
    Vector batch_y;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const auto perm = shuffled(m, rng);
        for (std::size_t begin = 0; begin < m; begin += config.batch_size) {
            const std::size_t end = std::min(m, begin + config.batch_size);
            const auto b = static_cast<Eigen::Index>(end - begin);
            batch_x.resize(b, phi.values.cols());
            batch_y.resize(b);
            for (Eigen::Index i = 0; i < b; ++i) {
                const auto src = static_cast<Eigen::Index>(perm[begin + static_cast<std::size_t>(i)]);
                batch_x.row(i) = phi.values.row(src);
                batch_y(i) = y(src);
            }
            const double eta =
                config.eta0 / (1.0 + config.eta0 * config.alpha * static_cast<double>(step++));
            // Gradient step on the data term, then the proximal map of the penalty.
            const LinearGradient g = mspe_gradient(batch_x, batch_y, model.weights, model.intercept, Penalty::l2, 0.0);
            model.weights -= eta * g.weights;
            model.intercept -= eta * g.intercept;
            if (config.penalty == Penalty::l1) soft_threshold(model.weights, eta * config.alpha);
            else model.weights /= 1.0 + 2.0 * eta * config.alpha;
        }
        const double loss =
            mspe_objective(phi.values, y, model.weights, model.intercept, config.penalty, config.alpha);
        if (!std::isfinite(loss))
            fail(ErrorCode::diverged,
                 fmt::format("SGD diverged at epoch {} with learning rate eta0={}", epoch + 1, config.eta0));
        model.loss_history.push_back(loss);
    }
    model.train_rmspe = rmspe(y, (phi.values * model.weights).array() + model.intercept);
    return model;
}

Labels argmax_rows(const Matrix& scores) {
    Labels out(static_cast<std::size_t>(scores.rows()));
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < scores.cols(); ++c)
            if (scores(r, c) > scores(r, best)) best = c;
        out[static_cast<std::size_t>(r)] = static_cast<int>(best);
    }
    return out;
}

namespace {

void softmax_rows(Matrix& z) {
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
        const double shift = z.row(r).maxCoeff();
        z.row(r) = (z.row(r).array() - shift).exp();
        z.row(r) /= z.row(r).sum();
    }
}

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// Per-class activations used during training: softmax for the multinomial
// loss, independent sigmoids for one-vs-rest.
void activate(Matrix& z, LogisticMode mode) {
    if (mode == LogisticMode::multinomial) softmax_rows(z);
    else z = z.unaryExpr([](double v) { return sigmoid(v); });
}

}  // namespace

Matrix logistic_scores_to_proba(const Matrix& scores, LogisticMode mode) {
    Matrix p = scores;
    activate(p, mode);
    if (mode == LogisticMode::one_vs_rest) {
        for (Eigen::Index r = 0; r < p.rows(); ++r) {
            const double total = p.row(r).sum();
            if (total > 0.0) p.row(r) /= total;
            else p.row(r).setConstant(1.0 / static_cast<double>(p.cols()));
        }
    }
    return p;
}

LogisticModel logistic_fit(const FeatureMatrix& x, const Labels& y, const LogisticConfig& config) {
    if (x.rows() != y.size())
        fail(ErrorCode::invalid_argument, fmt::format("X has {} rows but y has {} labels", x.rows(), y.size()));
    if (!(config.C > 0.0)) fail(ErrorCode::invalid_argument, fmt::format("C must be positive, got {}", config.C));
    if (config.epochs < 1 || config.batch_size < 1 || !(config.learning_rate > 0.0))
        fail(ErrorCode::invalid_argument, "epochs, batch_size and learning_rate must be positive");
    std::set<int> present;
    for (int label : y) {
        if (label < 0 || label >= kNumClasses)
            fail(ErrorCode::invalid_argument, fmt::format("label {} outside 0..4", label));
        present.insert(label);
    }
    if (present.size() < 2) fail(ErrorCode::invalid_argument, "logistic regression needs at least two classes");

    LogisticModel model;
    model.config = config;
    model.input_columns = x.column_names;
    Matrix features = x.values;
    if (config.pca_components) {
        model.pca = fit_pca(x, std::min(*config.pca_components, x.cols()));
        features = pca_project(x, *model.pca).values;
    }

    const auto d = features.cols();
    model.weights = Matrix::Zero(kNumClasses, d);
    model.bias = Vector::Zero(kNumClasses);
    const std::size_t m = x.rows();
    // Summed loss + (1/C) penalty == M * (mean loss + penalty / (C M)).
    const double lambda = 1.0 / (config.C * static_cast<double>(m));

    Rng rng = make_rng(config.seed, 0x1061);
    Matrix bx, z;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const auto perm = shuffled(m, rng);
        for (std::size_t begin = 0; begin < m; begin += config.batch_size) {
            const std::size_t end = std::min(m, begin + config.batch_size);
            const auto b = static_cast<Eigen::Index>(end - begin);
            bx.resize(b, d);
            for (Eigen::Index i = 0; i < b; ++i)
                bx.row(i) = features.row(static_cast<Eigen::Index>(perm[begin + static_cast<std::size_t>(i)]));
            z = (bx * model.weights.transpose()).rowwise() + model.bias.transpose();
            activate(z, config.mode);
            // Both losses have gradient (activation - indicator) w.r.t. the scores.
            for (Eigen::Index i = 0; i < b; ++i) z(i, y[perm[begin + static_cast<std::size_t>(i)]]) -= 1.0;
            z /= static_cast<double>(b);
            const double eta = config.learning_rate;
            model.weights -= eta * (z.transpose() * bx);
            model.bias -= eta * z.colwise().sum().transpose();
            if (config.penalty == Penalty::l1) {
                const double t = eta * lambda;
                model.weights = model.weights.unaryExpr(
                    [t](double v) { return v > t ? v - t : (v < -t ? v + t : 0.0); });
            } else {
                model.weights /= 1.0 + eta * lambda;
            }
        }
        if (!model.weights.allFinite() || !model.bias.allFinite())
            fail(ErrorCode::diverged, fmt::format("logistic regression diverged with learning rate {}",
                                                  config.learning_rate));
    }
    return model;
}

Matrix logistic_predict_proba(const LogisticModel& model, const FeatureMatrix& x) {
    if (x.column_names != model.input_columns)
        fail(ErrorCode::schema_mismatch, "logistic model input columns differ from the fitted columns");
    const Matrix features = model.pca ? pca_project(x, *model.pca).values : x.values;
    const Matrix scores = (features * model.weights.transpose()).rowwise() + model.bias.transpose();
    return logistic_scores_to_proba(scores, model.config.mode);
}

Labels logistic_predict(const LogisticModel& model, const FeatureMatrix& x) {
    return argmax_rows(logistic_predict_proba(model, x));
}

}  // namespace concert
