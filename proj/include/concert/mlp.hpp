#pragma once

#include "concert/data_model.hpp"
#include "concert/random.hpp"
#include "concert/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace concert {

struct MlpConfig {
    std::vector<std::size_t> hidden{64, 16, 16};
    std::vector<double> dropout;  // one rate per hidden layer; empty means none
    std::size_t epochs = 1000;
    std::size_t batch_size = 32;
    double learning_rate = 0.01;
    std::uint64_t seed = 0;
    /// Stop when validation accuracy has not improved for this many epochs
    /// and restore the best weights. Needs validation data.
    std::optional<std::size_t> patience;
};

/// Preset for the regularized run: at most 200 epochs, early stopping after 20.
MlpConfig tuned_mlp_preset();

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    std::optional<double> validation_accuracy;
};

/// Feed-forward classifier: affine + ReLU per hidden layer, softmax output.
struct MlpModel {
    MlpConfig config;
    std::vector<std::size_t> layer_sizes;  // d, hidden..., 5
    std::vector<Matrix> weights;           // layer l: out x in
    std::vector<Vector> biases;
    std::vector<std::string> input_columns;
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;

    std::size_t input_dim() const { return layer_sizes.front(); }
};

/// Zero-initialized network with the given layer sizes.
MlpModel mlp_zeros(std::vector<std::size_t> layer_sizes, std::vector<double> dropout = {});
/// Fan-in scaled uniform initialization, U(-sqrt(6/fan_in), sqrt(6/fan_in)), zero biases.
MlpModel mlp_init(std::size_t input_dim, const MlpConfig& config);

/// M x 5 probabilities. In training mode hidden activations pass through
/// inverted dropout drawn from `rng`; inference applies no dropout or scaling.
Matrix mlp_forward(const MlpModel& model, const Matrix& x, bool training = false, Rng* rng = nullptr);
Matrix mlp_predict_proba(const MlpModel& model, const FeatureMatrix& x);
Labels mlp_predict(const MlpModel& model, const FeatureMatrix& x);

/// Pre-activation of every layer for one forward pass.
std::vector<Matrix> mlp_preactivations(const MlpModel& model, const Matrix& x, bool training, Rng* rng);

struct MlpGradient {
    double loss = 0.0;  // mean categorical cross-entropy
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
};

/// Backpropagated gradient of the mean cross-entropy, without dropout.
MlpGradient mlp_loss_gradient(const MlpModel& model, const Matrix& x, const Labels& y);
double mlp_loss(const MlpModel& model, const Matrix& x, const Labels& y);

struct ValidationSet {
    const FeatureMatrix* x = nullptr;
    const Labels* y = nullptr;
};

/// Mini-batch SGD on categorical cross-entropy. Throws diverged (naming the
/// learning rate) when the loss becomes non-finite.
MlpModel mlp_train(const FeatureMatrix& x, const Labels& y, const MlpConfig& config,
                   ValidationSet validation = {});

/// epoch,train_loss,train_accuracy,validation_accuracy
std::string history_csv(const MlpModel& model);

}  // namespace concert
