#include <doctest.h>

#include "concert/error.hpp"
#include "concert/kernel_machines.hpp"
#include "concert/random.hpp"

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

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform01(rng) * 2 - 1;
    return m;
}

}  // namespace

TEST_CASE("rbf kernel") {
    const Eigen::Vector2d a(1, 2), b(3, 2);
    CHECK(rbf_eval(a, a, 5.0) == 1.0);
    CHECK(rbf_eval(a, b, 0.0) == 1.0);
    CHECK(rbf_eval(a, b, 0.01) == doctest::Approx(std::exp(-0.04)).epsilon(1e-12));
    CHECK(rbf_eval(a, b, 0.01) == doctest::Approx(0.96079).epsilon(1e-5));
    CHECK_THROWS_AS(rbf_eval(a, Eigen::Vector3d(1, 2, 3), 1.0), Error);
}

TEST_CASE("gram matrix is symmetric positive semidefinite and the cache agrees") {
    Rng rng = make_rng(1, 0);
    const Matrix x = random_matrix(8, 3, rng);
    const Eigen::MatrixXd gram = oracle::rbf_gram(x, 0.7);
    CHECK((gram - gram.transpose()).cwiseAbs().maxCoeff() == 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-8);

    KernelCache full(x, 0.7), lru(x, 0.7, 2, 0);
    CHECK(full.is_full());
    CHECK_FALSE(lru.is_full());
    for (std::size_t i = 0; i < 8; ++i) {
        const auto a = full.row(i);
        const auto b = lru.row(7 - i);
        for (std::size_t j = 0; j < 8; ++j) {
            CHECK(std::abs(a[j] - gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) < 1e-12);
            CHECK(std::abs(b[j] - gram(static_cast<Eigen::Index>(7 - i), static_cast<Eigen::Index>(j))) < 1e-12);
        }
    }
}

TEST_CASE("svc binary dual matches the brute-force optimum and KKT holds") {
    Rng rng = make_rng(2, 0);
    for (int t = 0; t < 10; ++t) {
        const Eigen::Index m = 3 + static_cast<Eigen::Index>(uniform_index(rng, 4));
        const Matrix x = random_matrix(m, 2, rng);
        std::vector<int> y(static_cast<std::size_t>(m));
        for (auto& v : y) v = uniform01(rng) < 0.5 ? -1 : 1;
        y[0] = 1;
        y[1] = -1;
        SvcConfig cfg;
        cfg.C = 0.5 + 5 * uniform01(rng);
        cfg.gamma = 0.5 + 2 * uniform01(rng);
        cfg.smo.record_objective = true;
        const BinarySvc svc = svc_fit_binary(x, y, cfg);
        const Eigen::MatrixXd gram = oracle::rbf_gram(x, cfg.gamma);
        const double best = oracle::svc_dual_max(gram, y, cfg.C);
        CHECK(std::abs(svc.dual_objective - best) < 1e-3);
        CHECK(svc.violation <= 1e-3);

        Eigen::VectorXd alpha = Eigen::Map<const Eigen::VectorXd>(svc.alpha.data(), m);
        CHECK(std::abs(svc_dual_objective(gram, y, alpha) - svc.dual_objective) < 1e-9);
        double balance = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            CHECK(alpha(i) >= 0.0);
            CHECK(alpha(i) <= cfg.C);
            balance += alpha(i) * y[static_cast<std::size_t>(i)];
        }
        CHECK(std::abs(balance) < 1e-6);

        const double tol = 1e-3;
        for (Eigen::Index i = 0; i < m; ++i) {
            const double margin = y[static_cast<std::size_t>(i)] * svc.decision(x.row(i), cfg.gamma);
            if (alpha(i) <= 0.0) CHECK(margin >= 1 - tol);
            else if (alpha(i) >= cfg.C) CHECK(margin <= 1 + tol);
            else CHECK(std::abs(margin - 1) <= tol);
        }
    }
}

TEST_CASE("svc dual on a 0.01 grid for two points") {
    Matrix x(2, 1);
    x << 0.0, 1.0;
    const std::vector<int> y{1, -1};
    SvcConfig cfg;
    cfg.C = 1.0;
    cfg.gamma = 1.0;
    const BinarySvc svc = svc_fit_binary(x, y, cfg);
    const Eigen::MatrixXd gram = oracle::rbf_gram(x, cfg.gamma);
    double best = -1e300;
    for (int i = 0; i <= 100; ++i) {
        const Eigen::Vector2d a(i / 100.0, i / 100.0);
        best = std::max(best, svc_dual_objective(gram, y, a));
    }
    CHECK(svc.dual_objective >= best - 1e-9);
    CHECK(svc.dual_objective - best < 1e-3);
}

TEST_CASE("smo objective never decreases") {
    Rng rng = make_rng(3, 0);
    const Matrix x = random_matrix(30, 2, rng);
    std::vector<int> y(30);
    for (Eigen::Index i = 0; i < 30; ++i) y[static_cast<std::size_t>(i)] = x(i, 0) * x(i, 1) > 0 ? 1 : -1;
    SvcConfig cfg;
    cfg.gamma = 1.0;
    cfg.smo.record_objective = true;
    SmoProblem problem;
    problem.C = cfg.C;
    problem.p.assign(30, -1.0);
    problem.y = y;
    for (std::size_t i = 0; i < 30; ++i) problem.base.push_back(i);
    KernelCache kernel(x, cfg.gamma);
    const SmoResult r = smo_solve(problem, kernel, cfg.smo);
    REQUIRE(r.objective_history.size() > 1);
    for (std::size_t i = 1; i < r.objective_history.size(); ++i)
        CHECK(r.objective_history[i] <= r.objective_history[i - 1] + 1e-12);
}

TEST_CASE("svr dual matches the brute-force optimum") {
    Rng rng = make_rng(4, 0);
    for (int t = 0; t < 10; ++t) {
        const Eigen::Index m = 2 + static_cast<Eigen::Index>(uniform_index(rng, 5));
        const Matrix x = random_matrix(m, 2, rng);
        Vector y(m);
        for (Eigen::Index i = 0; i < m; ++i) y(i) = 2 * x(i, 0) - x(i, 1) + 0.3 * (uniform01(rng) - 0.5);
        SvrConfig cfg;
        cfg.C = 0.2 + 2 * uniform01(rng);
        cfg.gamma = 0.5 + uniform01(rng);
        cfg.epsilon = 0.3 * uniform01(rng);
        const SvrModel model = svr_fit(matrix(x), y, cfg);
        const Eigen::MatrixXd gram = oracle::rbf_gram(x, cfg.gamma);
        const double best = oracle::svr_dual_max(gram, y, cfg.C, cfg.epsilon);
        CHECK(std::abs(model.dual_objective - best) < 1e-3);
        CHECK(model.violation <= 1e-3);

        const Eigen::VectorXd beta = Eigen::Map<const Eigen::VectorXd>(model.beta.data(), m);
        CHECK(std::abs(svr_dual_objective(gram, y, beta, cfg.epsilon) - model.dual_objective) < 1e-9);
        CHECK(beta.cwiseAbs().maxCoeff() <= cfg.C + 1e-12);
        CHECK(std::abs(beta.sum()) < 1e-6);
        const Vector fitted = model.predict(matrix(x));
        for (Eigen::Index i = 0; i < m; ++i)
            if (std::abs(y(i) - fitted(i)) < cfg.epsilon - 1e-3) CHECK(beta(i) == 0.0);
    }
}

TEST_CASE("svr on constant targets stays inside the tube") {
    Rng rng = make_rng(5, 0);
    const Matrix x = random_matrix(12, 2, rng);
    SvrConfig cfg;
    cfg.epsilon = 0.5;
    const SvrModel model = svr_fit(matrix(x), Vector::Constant(12, 4.0), cfg);
    for (double b : model.beta) CHECK(b == 0.0);
    CHECK(model.intercept == doctest::Approx(4.0));
    CHECK((model.predict(matrix(x)).array() - 4.0).abs().maxCoeff() < 0.5);
}

TEST_CASE("svc multi-class") {
    SUBCASE("two points with large C") {
        Matrix x(2, 1);
        x << 0.0, 1.0;
        SvcConfig cfg;
        cfg.C = 1e3;
        cfg.gamma = 1.0;
        const SvcModel model = svc_fit(matrix(x), {0, 3}, cfg, 1);
        CHECK(svc_predict(model, matrix(x)) == Labels{0, 3});
        CHECK(model.machines[0].support_vectors.rows() == 2);
        CHECK_FALSE(model.machines[1].trained);
    }
    SUBCASE("reference configuration is accepted") {
        Rng rng = make_rng(6, 0);
        const Matrix x = random_matrix(40, 2, rng);
        Labels y;
        for (Eigen::Index i = 0; i < 40; ++i) y.push_back(x(i, 0) > 0 ? 1 : 2);
        const SvcModel model = svc_fit(matrix(x), y, SvcConfig{});
        CHECK(model.config.C == 10.0);
        CHECK(model.config.gamma == 0.01);
        for (const auto& machine : model.machines) {
            if (!machine.trained) continue;
            double balance = 0.0;
            for (std::size_t i = 0; i < machine.alpha.size(); ++i) balance += machine.alpha[i] * machine.labels[i];
            CHECK(std::abs(balance) < 1e-6);
        }
    }
    CHECK_THROWS_AS(svc_fit(matrix(Matrix::Zero(3, 1)), {1, 1, 1}, SvcConfig{}), Error);
}

TEST_CASE("svr reference configuration") {
    const SvrConfig cfg;
    CHECK(cfg.C == 0.5);
    CHECK(cfg.gamma == 0.01);
    CHECK(cfg.epsilon == 2.0);
}
