#include "concert/mlp.hpp"

#include "concert/error.hpp"
#include "concert/linear_models.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace concert {

MlpConfig tuned_mlp_preset() {
    MlpConfig c;
    c.epochs = 200;
    c.patience = 20;
    c.dropout = {0.2, 0.2, 0.2};
    return c;
}

MlpModel mlp_zeros(std::vector<std::size_t> layer_sizes, std::vector<double> dropout) {
    if (layer_sizes.size() < 2) fail(ErrorCode::invalid_argument, "an MLP needs at least an input and an output layer");
    MlpModel m;
    m.layer_sizes = std::move(layer_sizes);
    m.config.hidden.assign(m.layer_sizes.begin() + 1, m.layer_sizes.end() - 1);
    m.config.dropout = std::move(dropout);
    for (std::size_t l = 1; l < m.layer_sizes.size(); ++l) {
        m.weights.push_back(Matrix::Zero(static_cast<Eigen::Index>(m.layer_sizes[l]),
                                         static_cast<Eigen::Index>(m.layer_sizes[l - 1])));
        m.biases.push_back(Vector::Zero(static_cast<Eigen::Index>(m.layer_sizes[l])));
    }
    return m;
}

namespace {

void check_config(const MlpConfig& config) {
    if (config.epochs < 1) fail(ErrorCode::invalid_argument, "epochs must be at least 1");
    if (config.batch_size < 1) fail(ErrorCode::invalid_argument, "batch_size must be at least 1");
    if (!(config.learning_rate > 0.0)) fail(ErrorCode::invalid_argument, "learning_rate must be positive");
    if (!config.dropout.empty() && config.dropout.size() != config.hidden.size())
        fail(ErrorCode::invalid_argument,
             fmt::format("{} dropout rates for {} hidden layers", config.dropout.size(), config.hidden.size()));
    for (double p : config.dropout)
        if (p < 0.0 || p >= 1.0) fail(ErrorCode::invalid_argument, fmt::format("dropout rate {} outside [0,1)", p));
    for (auto h : config.hidden)
        if (h == 0) fail(ErrorCode::invalid_argument, "hidden layers must be non-empty");
}

double dropout_rate(const MlpModel& m, std::size_t hidden_layer) {
    return m.config.dropout.empty() ? 0.0 : m.config.dropout[hidden_layer];
}

void softmax_rows(Matrix& z) {
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
        const double shift = z.row(r).maxCoeff();
        z.row(r) = (z.row(r).array() - shift).exp();
        z.row(r) /= z.row(r).sum();
    }
}

struct Pass {
    std::vector<Matrix> pre;          // z_l
    std::vector<Matrix> activations;  // a_0 = x, a_l after ReLU and dropout
    std::vector<Matrix> masks;        // scaled keep masks, empty when unused
    Matrix proba;
};

Pass forward_pass(const MlpModel& m, const Matrix& x, bool training, Rng* rng) {
    if (static_cast<std::size_t>(x.cols()) != m.input_dim())
        fail(ErrorCode::invalid_argument,
             fmt::format("MLP expects {} input columns, got {}", m.input_dim(), x.cols()));
    const std::size_t layers = m.weights.size();
    Pass p;
    p.activations.push_back(x);
    for (std::size_t l = 0; l < layers; ++l) {
        Matrix z = (p.activations.back() * m.weights[l].transpose()).rowwise() + m.biases[l].transpose();
        p.pre.push_back(z);
        if (l + 1 == layers) {
            softmax_rows(z);
            p.proba = std::move(z);
            break;
        }
        Matrix a = z.cwiseMax(0.0);
        const double rate = dropout_rate(m, l);
        if (training && rate > 0.0) {
            if (!rng) fail(ErrorCode::invalid_argument, "training-mode dropout needs a random generator");
            Matrix mask(a.rows(), a.cols());
            const double keep_scale = 1.0 / (1.0 - rate);
            for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = uniform01(*rng) < rate ? 0.0 : keep_scale;
            a = a.cwiseProduct(mask);
            p.masks.push_back(std::move(mask));
        } else {
            p.masks.emplace_back();
        }
        p.activations.push_back(std::move(a));
    }
    return p;
}

double cross_entropy(const Matrix& proba, const Labels& y) {
    double loss = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i)
        loss -= std::log(std::max(proba(static_cast<Eigen::Index>(i), y[i]), 1e-300));
    return loss / static_cast<double>(y.size());
}

MlpGradient backward(const MlpModel& m, const Pass& p, const Labels& y) {
    const std::size_t layers = m.weights.size();
    const double b = static_cast<double>(y.size());
    MlpGradient g;
    g.loss = cross_entropy(p.proba, y);
    g.weights.resize(layers);
    g.biases.resize(layers);

    Matrix delta = p.proba;
    for (std::size_t i = 0; i < y.size(); ++i) delta(static_cast<Eigen::Index>(i), y[i]) -= 1.0;
    delta /= b;
    for (std::size_t l = layers; l-- > 0;) {
        g.weights[l] = delta.transpose() * p.activations[l];
        g.biases[l] = delta.colwise().sum().transpose();
        if (l == 0) break;
        Matrix upstream = delta * m.weights[l];
        const auto& mask = p.masks[l - 1];
        if (mask.size()) upstream = upstream.cwiseProduct(mask);
        const auto& z = p.pre[l - 1];
        delta = upstream.array() * (z.array() > 0.0).cast<double>();
    }
    return g;
}

Labels to_labels_checked(const Labels& y) {
    for (int label : y)
        if (label < 0 || label >= kNumClasses)
            fail(ErrorCode::invalid_argument, fmt::format("label {} outside 0..4", label));
    return y;
}

double accuracy_of(const Matrix& proba, const Labels& y) {
    const Labels pred = argmax_rows(proba);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < y.size(); ++i) hits += pred[i] == y[i];
    return y.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(y.size());
}

}  // namespace

MlpModel mlp_init(std::size_t input_dim, const MlpConfig& config) {
    check_config(config);
    std::vector<std::size_t> sizes{input_dim};
    sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
    sizes.push_back(kNumClasses);
    MlpModel m = mlp_zeros(sizes, config.dropout);
    m.config = config;
    Rng rng = make_rng(config.seed, 0x1417);
    for (auto& w : m.weights) {
        const double limit = std::sqrt(6.0 / static_cast<double>(w.cols()));
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = (2.0 * uniform01(rng) - 1.0) * limit;
    }
    return m;
}

Matrix mlp_forward(const MlpModel& model, const Matrix& x, bool training, Rng* rng) {
    return forward_pass(model, x, training, rng).proba;
}

std::vector<Matrix> mlp_preactivations(const MlpModel& model, const Matrix& x, bool training, Rng* rng) {
    return forward_pass(model, x, training, rng).pre;
}

Matrix mlp_predict_proba(const MlpModel& model, const FeatureMatrix& x) {
    if (x.column_names != model.input_columns)
        fail(ErrorCode::schema_mismatch, "MLP input columns differ from the fitted columns");
    return mlp_forward(model, x.values);
}

Labels mlp_predict(const MlpModel& model, const FeatureMatrix& x) { return argmax_rows(mlp_predict_proba(model, x)); }

MlpGradient mlp_loss_gradient(const MlpModel& model, const Matrix& x, const Labels& y) {
    if (static_cast<std::size_t>(x.rows()) != y.size()) fail(ErrorCode::invalid_argument, "X rows and label count differ");
    return backward(model, forward_pass(model, x, false, nullptr), to_labels_checked(y));
}

double mlp_loss(const MlpModel& model, const Matrix& x, const Labels& y) {
    return cross_entropy(mlp_forward(model, x), to_labels_checked(y));
}

MlpModel mlp_train(const FeatureMatrix& x, const Labels& y, const MlpConfig& config, ValidationSet validation) {
    check_config(config);
    if (x.rows() != y.size())
        fail(ErrorCode::invalid_argument, fmt::format("X has {} rows but y has {} labels", x.rows(), y.size()));
    if (x.rows() == 0) fail(ErrorCode::invalid_argument, "MLP training needs at least one row");
    to_labels_checked(y);
    const bool has_validation = validation.x && validation.y;
    if (config.patience && !has_validation)
        fail(ErrorCode::invalid_argument, "early stopping needs a validation set");

    MlpModel model = mlp_init(x.cols(), config);
    model.input_columns = x.column_names;
    MlpModel best = model;
    double best_val = -1.0;

    Rng rng = make_rng(config.seed, 0x5ef);
    const std::size_t m = x.rows();
    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Matrix bx;
    Labels by;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        for (std::size_t i = m; i > 1; --i) std::swap(perm[i - 1], perm[uniform_index(rng, i)]);
        for (std::size_t begin = 0; begin < m; begin += config.batch_size) {
            const std::size_t end = std::min(m, begin + config.batch_size);
            bx.resize(static_cast<Eigen::Index>(end - begin), x.values.cols());
            by.resize(end - begin);
            for (std::size_t i = begin; i < end; ++i) {
                bx.row(static_cast<Eigen::Index>(i - begin)) = x.values.row(static_cast<Eigen::Index>(perm[i]));
                by[i - begin] = y[perm[i]];
            }
            const MlpGradient g = backward(model, forward_pass(model, bx, true, &rng), by);
            if (!std::isfinite(g.loss))
                fail(ErrorCode::diverged,
                     fmt::format("MLP training diverged at epoch {} with learning rate {}", epoch, config.learning_rate));
            for (std::size_t l = 0; l < model.weights.size(); ++l) {
                model.weights[l] -= config.learning_rate * g.weights[l];
                model.biases[l] -= config.learning_rate * g.biases[l];
            }
        }

        EpochRecord rec;
        rec.epoch = epoch;
        const Matrix proba = mlp_forward(model, x.values);
        rec.train_loss = cross_entropy(proba, y);
        if (!std::isfinite(rec.train_loss))
            fail(ErrorCode::diverged,
                 fmt::format("MLP training diverged at epoch {} with learning rate {}", epoch, config.learning_rate));
        rec.train_accuracy = accuracy_of(proba, y);
        if (has_validation) rec.validation_accuracy = accuracy_of(mlp_predict_proba(model, *validation.x), *validation.y);
        model.history.push_back(rec);

        if (config.patience) {
            if (*rec.validation_accuracy > best_val) {
                best_val = *rec.validation_accuracy;
                best = model;
                best.best_epoch = epoch;
            } else if (epoch - best.best_epoch >= *config.patience) {
                break;
            }
        }
    }
    if (config.patience) {
        best.history = std::move(model.history);
        return best;
    }
    model.best_epoch = model.history.size();
    return model;
}

std::string history_csv(const MlpModel& model) {
    std::string out = "epoch,train_loss,train_accuracy,validation_accuracy\n";
    for (const auto& r : model.history)
        out += fmt::format("{},{},{},{}\n", r.epoch, r.train_loss, r.train_accuracy,
                           r.validation_accuracy ? fmt::format("{}", *r.validation_accuracy) : std::string("NA"));
    return out;
}

}  // namespace concert
