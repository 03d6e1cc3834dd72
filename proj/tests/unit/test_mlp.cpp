#include <doctest.h>

#include "concert/error.hpp"
#include "concert/mlp.hpp"

#include "../oracles.hpp"

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

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * (uniform01(rng) * 2 - 1);
    return m;
}

MlpModel random_model(std::vector<std::size_t> sizes, Rng& rng) {
    MlpModel m = mlp_zeros(std::move(sizes));
    for (auto& w : m.weights) w = random_matrix(w.rows(), w.cols(), rng);
    for (auto& b : m.biases) b = random_matrix(b.size(), 1, rng, 0.5);
    return m;
}

// Parameters flattened as weights then biases, layer by layer.
Vector flatten(const MlpModel& m) {
    std::vector<double> out;
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
        out.insert(out.end(), m.weights[l].data(), m.weights[l].data() + m.weights[l].size());
        out.insert(out.end(), m.biases[l].data(), m.biases[l].data() + m.biases[l].size());
    }
    return Eigen::Map<Vector>(out.data(), static_cast<Eigen::Index>(out.size()));
}

void unflatten(MlpModel& m, const Vector& v) {
    Eigen::Index pos = 0;
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
        for (Eigen::Index i = 0; i < m.weights[l].size(); ++i) m.weights[l].data()[i] = v(pos++);
        for (Eigen::Index i = 0; i < m.biases[l].size(); ++i) m.biases[l](i) = v(pos++);
    }
}

}  // namespace

TEST_CASE("forward pass") {
    SUBCASE("zero network is uniform") {
        const MlpModel m = mlp_zeros({4, 64, 16, 16, 5});
        CHECK(mlp_forward(m, Matrix::Ones(3, 4)).isApproxToConstant(0.2, 1e-15));
    }
    SUBCASE("hand-built single hidden unit") {
        MlpModel m = mlp_zeros({1, 1, 5});
        m.weights[0](0, 0) = 2.0;
        m.biases[0](0) = -1.0;
        m.weights[1].col(0) << 0.5, -1.0, 0.0, 2.0, 1.0;
        m.biases[1] << 0.1, 0.2, 0.3, -0.4, 0.0;
        Matrix x(2, 1);
        x << 1.5, 0.2;  // the second input is cut by the ReLU
        const Matrix p = mlp_forward(m, x);
        for (int r = 0; r < 2; ++r) {
            const double h = std::max(0.0, 2.0 * x(r, 0) - 1.0);
            double z[5], total = 0.0;
            for (int k = 0; k < 5; ++k) total += std::exp(z[k] = m.weights[1](k, 0) * h + m.biases[1](k));
            for (int k = 0; k < 5; ++k) CHECK(std::abs(p(r, k) - std::exp(z[k]) / total) < 1e-10);
        }
        CHECK((p.row(1).transpose() - mlp_forward(mlp_zeros({1, 1, 5}), x).row(1).transpose()).norm() > 0);
    }
    SUBCASE("output bias shift leaves probabilities unchanged") {
        Rng rng = make_rng(1, 0);
        MlpModel m = random_model({3, 6, 4, 5}, rng);
        const Matrix x = random_matrix(7, 3, rng);
        const Matrix before = mlp_forward(m, x);
        m.biases.back().array() += 3.7;
        CHECK((mlp_forward(m, x) - before).cwiseAbs().maxCoeff() < 1e-9);
        CHECK((before.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-9);
        CHECK(before.minCoeff() >= 0.0);
    }
    CHECK_THROWS_AS(mlp_forward(mlp_zeros({3, 4, 5}), Matrix::Ones(2, 2)), Error);
}

TEST_CASE("backpropagation matches central differences") {
    Rng rng = make_rng(2, 0);
    for (int t = 0; t < 20; ++t) {
        std::vector<std::size_t> sizes{1 + uniform_index(rng, 4)};
        const std::size_t hidden = 1 + uniform_index(rng, 3);
        for (std::size_t h = 0; h < hidden; ++h) sizes.push_back(2 + uniform_index(rng, 5));
        sizes.push_back(5);
        MlpModel m = random_model(sizes, rng);
        const Matrix x = random_matrix(6, static_cast<Eigen::Index>(sizes[0]), rng, 2.0);
        Labels y;
        for (int i = 0; i < 6; ++i) y.push_back(static_cast<int>(uniform_index(rng, 5)));

        const MlpGradient g = mlp_loss_gradient(m, x, y);
        CHECK(g.loss == doctest::Approx(mlp_loss(m, x, y)).epsilon(1e-12));
        MlpModel analytic = m;
        analytic.weights = g.weights;
        analytic.biases = g.biases;
        MlpModel probe = m;
        const auto loss = [&](const Vector& theta) {
            unflatten(probe, theta);
            return mlp_loss(probe, x, y);
        };
        CHECK(oracle::relative_error(flatten(analytic), oracle::numeric_gradient(loss, flatten(m))) < 1e-4);
    }
}

TEST_CASE("training") {
    Rng rng = make_rng(3, 0);
    SUBCASE("memorizes 20 rows") {
        const Matrix x = random_matrix(20, 4, rng);
        Labels y;
        for (int i = 0; i < 20; ++i) y.push_back(i % 5);
        MlpConfig cfg;
        cfg.hidden = {64, 16, 16};
        cfg.epochs = 1000;
        cfg.batch_size = 4;
        cfg.learning_rate = 0.05;
        const MlpModel m = mlp_train(matrix(x), y, cfg);
        CHECK(mlp_predict(m, matrix(x)) == y);
        CHECK(m.history.size() == 1000);
        CHECK(history_csv(m).rfind("epoch,train_loss,train_accuracy,validation_accuracy", 0) == 0);
    }
    SUBCASE("full-batch loss decreases on a tiny noiseless set") {
        Matrix x(10, 2);
        Labels y;
        for (int i = 0; i < 10; ++i) {
            x(i, 0) = i / 10.0;
            x(i, 1) = 1 - i / 10.0;
            y.push_back(i / 2);
        }
        MlpConfig cfg;
        cfg.hidden = {8};
        cfg.epochs = 200;
        cfg.batch_size = 10;
        cfg.learning_rate = 0.01;
        const MlpModel m = mlp_train(matrix(x), y, cfg);
        for (std::size_t e = 1; e < m.history.size(); ++e)
            CHECK(m.history[e].train_loss <= m.history[e - 1].train_loss + 1e-6);
    }
    SUBCASE("zero epochs are rejected") {
        MlpConfig cfg;
        cfg.epochs = 0;
        CHECK_THROWS_AS(mlp_train(matrix(Matrix::Ones(3, 2)), {0, 1, 2}, cfg), Error);
    }
    SUBCASE("divergence names the learning rate") {
        MlpConfig cfg;
        cfg.hidden = {4};
        cfg.epochs = 50;
        cfg.learning_rate = 1e9;
        try {
            mlp_train(matrix(random_matrix(20, 3, rng, 100.0)), Labels{0, 1, 2, 3, 4, 0, 1, 2, 3, 4, 0, 1, 2, 3, 4, 0, 1, 2, 3, 4}, cfg);
            FAIL("expected divergence");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::diverged);
            CHECK(std::string(e.what()).find("learning rate") != std::string::npos);
        }
    }
}

TEST_CASE("dropout keeps the expected pre-activation") {
    Rng rng = make_rng(4, 0);
    MlpModel m = random_model({3, 16, 8, 5}, rng);
    m.config.dropout = {0.3, 0.3};
    const Matrix x = random_matrix(1, 3, rng);
    const std::vector<Matrix> reference = mlp_preactivations(m, x, false, nullptr);
    Rng masks = make_rng(5, 0);
    std::vector<Matrix> sums;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) {
        const auto pre = mlp_preactivations(m, x, true, &masks);
        if (sums.empty()) sums = pre;
        else
            for (std::size_t l = 0; l < pre.size(); ++l) sums[l] += pre[l];
    }
    const Matrix mean = sums[1] / draws;
    CHECK((mean - reference[1]).norm() / reference[1].norm() < 0.01);
    CHECK(mlp_forward(m, x) == mlp_forward(m, x));
}

TEST_CASE("tuned preset") {
    const MlpConfig preset = tuned_mlp_preset();
    CHECK(preset.epochs <= 200);
    CHECK(preset.patience.has_value());
    CHECK(MlpConfig{}.hidden == std::vector<std::size_t>{64, 16, 16});
}
