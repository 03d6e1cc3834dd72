// One PASS/FAIL line per acceptance criterion. Exit status is the number of
// failures.

#include "concert/city_cluster.hpp"
#include "concert/cli.hpp"
#include "concert/error.hpp"
#include "concert/evaluation.hpp"
#include "concert/kernel_machines.hpp"
#include "concert/linear_models.hpp"
#include "concert/mlp.hpp"
#include "concert/pipeline.hpp"

#include "../oracles.hpp"

#include <fmt/format.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

using namespace concert;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double low = -1, double high = 1) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = low + (high - low) * uniform01(rng);
    return m;
}

FeatureMatrix features(const Matrix& values) {
    FeatureMatrix x;
    x.values = values;
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
        x.column_names.push_back(fmt::format("f{}", c));
        x.column_kinds.push_back(ColumnKind::continuous);
    }
    return x;
}

Outcome rmspe_oracle() {
    Rng rng = make_rng(1, 0);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const auto m = static_cast<Eigen::Index>(1 + uniform_index(rng, 50));
        const Vector y = random_matrix(m, 1, rng, 0.1, 500);
        const Vector p = random_matrix(m, 1, rng, 0.0, 600);
        const double got = rmspe(y, p);
        const double want = oracle::rmspe({y.data(), y.data() + m}, {p.data(), p.data() + m});
        worst = std::max(worst, std::abs(got - want));
    }
    return {worst <= 1e-12, fmt::format("100 pairs, max |diff| {:.3g}", worst)};
}

// Flattened MLP parameters, weights then biases per layer.
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

Outcome gradient_checks() {
    Rng rng = make_rng(2, 0);
    double worst_sgd = 0.0, worst_mlp = 0.0;
    const int configs = 20;
    for (int t = 0; t < configs; ++t) {
        const auto m = static_cast<Eigen::Index>(5 + uniform_index(rng, 20));
        const auto d = static_cast<Eigen::Index>(1 + uniform_index(rng, 6));
        const Matrix x = random_matrix(m, d, rng);
        const Vector y = random_matrix(m, 1, rng, 1, 10);
        const Vector w = random_matrix(d, 1, rng);
        const double w0 = uniform01(rng), alpha = uniform01(rng);
        const Penalty penalty = t % 2 ? Penalty::l2 : Penalty::l1;
        const LinearGradient g = mspe_gradient(x, y, w, w0, penalty, alpha);
        Vector analytic(d + 1), theta(d + 1);
        analytic << g.weights, g.intercept;
        theta << w, w0;
        // Smooth part only; L1 is a proximal step.
        const auto smooth = [&](const Vector& th) {
            const Vector ww = th.head(d);
            return mspe_objective(x, y, ww, th(d), penalty, alpha) -
                   (penalty == Penalty::l1 ? alpha * ww.lpNorm<1>() : 0.0);
        };
        worst_sgd = std::max(worst_sgd, oracle::relative_error(analytic, oracle::numeric_gradient(smooth, theta)));

        std::vector<std::size_t> sizes{static_cast<std::size_t>(1 + uniform_index(rng, 5))};
        const std::size_t hidden = 1 + uniform_index(rng, 3);
        for (std::size_t h = 0; h < hidden; ++h) sizes.push_back(2 + uniform_index(rng, 8));
        sizes.push_back(kNumClasses);
        MlpModel net = mlp_zeros(sizes);
        for (auto& wl : net.weights) wl = random_matrix(wl.rows(), wl.cols(), rng);
        for (auto& bl : net.biases) bl = random_matrix(bl.size(), 1, rng, -0.5, 0.5);
        const Matrix xm = random_matrix(6, static_cast<Eigen::Index>(sizes[0]), rng, -2, 2);
        Labels ym;
        for (int i = 0; i < 6; ++i) ym.push_back(static_cast<int>(uniform_index(rng, kNumClasses)));
        const MlpGradient mg = mlp_loss_gradient(net, xm, ym);
        MlpModel grad = net;
        grad.weights = mg.weights;
        grad.biases = mg.biases;
        MlpModel probe = net;
        const auto loss = [&](const Vector& th) {
            unflatten(probe, th);
            return mlp_loss(probe, xm, ym);
        };
        worst_mlp = std::max(worst_mlp, oracle::relative_error(flatten(grad), oracle::numeric_gradient(loss, flatten(net))));
    }
    return {worst_sgd < 1e-4 && worst_mlp < 1e-4,
            fmt::format("{} configurations, max relative error sgd {:.2e} mlp {:.2e}", configs, worst_sgd, worst_mlp)};
}

Outcome dual_solver_oracle() {
    Rng rng = make_rng(3, 0);
    double worst_gap = 0.0, worst_kkt = 0.0;
    int instances = 0;
    for (int t = 0; t < 10; ++t) {
        const auto m = static_cast<Eigen::Index>(2 + uniform_index(rng, 5));
        const Matrix x = random_matrix(m, 2, rng);
        std::vector<int> y(static_cast<std::size_t>(m));
        for (auto& v : y) v = uniform01(rng) < 0.5 ? -1 : 1;
        y[0] = 1;
        y[1] = -1;
        SvcConfig cfg;
        cfg.C = 0.1 + 10 * uniform01(rng);
        cfg.gamma = 0.2 + 2 * uniform01(rng);
        const BinarySvc svc = svc_fit_binary(x, y, cfg);
        const double best = oracle::svc_dual_max(oracle::rbf_gram(x, cfg.gamma), y, cfg.C);
        worst_gap = std::max(worst_gap, std::abs(svc.dual_objective - best));
        worst_kkt = std::max(worst_kkt, svc.violation);
        ++instances;
    }
    for (int t = 0; t < 10; ++t) {
        const auto m = static_cast<Eigen::Index>(2 + uniform_index(rng, 5));
        const Matrix x = random_matrix(m, 2, rng);
        Vector y(m);
        for (Eigen::Index i = 0; i < m; ++i) y(i) = x(i, 0) - 2 * x(i, 1) + 0.5 * uniform01(rng);
        SvrConfig cfg;
        cfg.C = 0.1 + 3 * uniform01(rng);
        cfg.gamma = 0.2 + 2 * uniform01(rng);
        cfg.epsilon = 0.4 * uniform01(rng);
        const SvrModel svr = svr_fit(features(x), y, cfg);
        const double best = oracle::svr_dual_max(oracle::rbf_gram(x, cfg.gamma), y, cfg.C, cfg.epsilon);
        worst_gap = std::max(worst_gap, std::abs(svr.dual_objective - best));
        worst_kkt = std::max(worst_kkt, svr.violation);
        ++instances;
    }
    return {worst_gap <= 1e-3 && worst_kkt <= 1e-3,
            fmt::format("{} instances (10 SVC, 10 SVR, M <= 6), max objective gap {:.2e}, max KKT violation {:.2e}",
                        instances, worst_gap, worst_kkt)};
}

Outcome kmeans_recovery() {
    Rng rng = make_rng(4, 0);
    const double centers[3][2] = {{22000, 400}, {48000, 4200}, {75000, 1500}};
    std::vector<CityFeatures> cities;
    for (int b = 0; b < 3; ++b)
        for (int i = 0; i < 3; ++i)
            cities.push_back({fmt::format("city{}", cities.size()), centers[b][0] + 1000 * (uniform01(rng) - 0.5),
                              centers[b][1] + 100 * (uniform01(rng) - 0.5), std::nullopt});
    KMeansConfig cfg;
    cfg.k = 3;
    cfg.seed = 4;
    const KMeansModel model = kmeans_fit(cities, cfg);

    Eigen::MatrixXd z(9, 2);
    for (Eigen::Index i = 0; i < 9; ++i)
        z.row(i) << cities[static_cast<std::size_t>(i)].income_per_capita, cities[static_cast<std::size_t>(i)].population_density;
    z.rowwise() -= z.colwise().mean();
    const Eigen::RowVectorXd sd = (z.array().square().colwise().sum() / 9.0).sqrt();
    z = z.array().rowwise() / sd.array();
    std::vector<int> best;
    oracle::best_partition(z, 3, best);
    std::vector<int> planted{0, 0, 0, 1, 1, 1, 2, 2, 2};

    bool monotone = true;
    for (std::size_t i = 1; i < model.inertia_history.size(); ++i)
        monotone = monotone && model.inertia_history[i] <= model.inertia_history[i - 1] + 1e-12;
    // Every restart's history is checked too, through the Lloyd core.
    Matrix zm = z;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng r = make_rng(seed, 0);
        const LloydResult lr = lloyd(zm, 3, r, 300);
        for (std::size_t i = 1; i < lr.inertia_history.size(); ++i)
            monotone = monotone && lr.inertia_history[i] <= lr.inertia_history[i - 1] + 1e-12;
    }
    const bool optimal = oracle::same_partition(model.assignments, best);
    return {optimal && monotone && oracle::same_partition(best, planted),
            fmt::format("brute-force optimum {}, blob partition {}, inertia non-increasing {}",
                        optimal ? "matched" : "missed", oracle::same_partition(best, planted) ? "yes" : "no",
                        monotone ? "yes" : "no")};
}

Outcome benchmark_anchors() {
    const RandomGuessClassifier guess = random_guess_baseline(kNumClasses, 5);
    Rng rng = make_rng(5, 0);
    Labels truth(10000);
    for (auto& v : truth) v = static_cast<int>(uniform_index(rng, kNumClasses));
    const double guess_acc = accuracy(truth, guess.predict(truth.size()));

    SyntheticSpec spec;
    spec.rows = 600;
    spec.seed = 5;
    const SyntheticData d = generate_synthetic(spec);
    const TaskData task = prepare_task(d.concerts, Task::location);
    const double memorized = overfit_upper_bound(ModelFamily::forest, task.x, task.labels, 5);
    return {std::abs(guess_acc - 0.2) <= 0.02 && memorized == 1.0,
            fmt::format("random guess {:.4f} over 10^4 draws, forest memorization {:.4f} on {} rows", guess_acc,
                        memorized, task.rows())};
}

Outcome headline_analog() {
    SyntheticSpec spec;
    spec.rows = 2000;
    spec.label_noise = 0.2;
    spec.price_signal = 0.0;
    spec.seed = 2024;
    const SyntheticData d = generate_synthetic(spec);
    PipelineOptions options;
    options.seed = 2024;
    options.threads = 0;

    const TaskData location = prepare_task(d.concerts, Task::location);
    const TuneOutcome forest = tune_task(location, Task::location, ModelFamily::forest, Hyperparameters{},
                                         default_search_plan(ModelFamily::forest), options);
    const double acc = forest.final.classification.test_accuracy;
    const double ratio = acc / 0.2;

    const TaskData price = prepare_task(d.concerts, Task::price);
    double best = std::numeric_limits<double>::infinity();
    std::string best_name;
    std::optional<ConstantScores> constant;
    for (ModelFamily f : {ModelFamily::sgd, ModelFamily::svr}) {
        const TuneOutcome t = tune_task(price, Task::price, f, Hyperparameters{}, default_search_plan(f), options);
        if (t.final.regression.test_rmspe < best) {
            best = t.final.regression.test_rmspe;
            best_name = std::string(to_string(f));
        }
        constant = t.final.constant;
    }
    const double gap = std::abs(constant->test_rmspe - best) / best;
    return {acc >= 0.60 && ratio >= 3.0 && gap <= 0.05,
            fmt::format("tuned forest test accuracy {:.4f} ({:.2f}x lower bound); constant RMSPE {:.4f} vs best tuned "
                        "{} {:.4f} (gap {:.2f}%)",
                        acc, ratio, constant->test_rmspe, best_name, best, 100 * gap)};
}

int cli(std::vector<std::string> args) {
    args.insert(args.begin(), "concert");
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    if (code != 0) std::cerr << err.str();
    return code;
}

std::string read_all(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Drops the trailing duration column of a trial log.
std::string without_duration(const std::string& text) {
    std::istringstream in(text);
    std::string line, out;
    while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + '\n';
    return out;
}

Outcome determinism() {
    const fs::path root = fs::temp_directory_path() / "concert_acceptance";
    fs::remove_all(root);
    fs::create_directories(root);
    const std::string data = (root / "data.csv").string();
    if (cli({"generate-synthetic", "--rows", "500", "--seed", "7", "--out", data}) != 0)
        return {false, "generate-synthetic failed"};

    const auto run_all = [&](const fs::path& dir) {
        const auto p = [&](const std::string& name) { return (dir / name).string(); };
        fs::create_directories(dir);
        int failures = 0;
        failures += cli({"train", "--input", data, "--task", "both", "--seed", "3", "--out", p("train_bundle.json"),
                         "--report", p("train_report.json")}) != 0;
        failures += cli({"tune", "--input", data, "--task", "location", "--model", "forest", "--trials", "4", "--seed",
                         "3", "--log", p("tune_forest.csv"), "--report", p("tune_forest.json"), "--out",
                         p("tune_forest_bundle.json")}) != 0;
        failures += cli({"tune", "--input", data, "--task", "price", "--model", "sgd", "--seed", "3", "--log",
                         p("tune_sgd.csv"), "--report", p("tune_sgd.json"), "--out", p("tune_sgd_bundle.json")}) != 0;
        failures += cli({"benchmark", "--input", data, "--task", "location", "--seed", "3", "--out-dir",
                         p("bench_location")}) != 0;
        failures += cli({"benchmark", "--input", data, "--task", "price", "--seed", "3", "--out-dir", p("bench_price")}) != 0;
        return failures;
    };
    if (run_all(root / "a") + run_all(root / "b") > 0) return {false, "a command failed"};

    std::size_t compared = 0;
    std::vector<std::string> differing;
    for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
        if (!entry.is_regular_file()) continue;
        const fs::path rel = fs::relative(entry.path(), root / "a");
        std::string a = read_all(entry.path()), b = read_all(root / "b" / rel);
        if (rel.filename().string().rfind("tune_", 0) == 0 && rel.extension() == ".csv") {
            a = without_duration(a);
            b = without_duration(b);
        }
        ++compared;
        if (a != b || a.empty()) differing.push_back(rel.string());
    }
    return {differing.empty() && compared > 0,
            differing.empty() ? fmt::format("{} report/bundle/log files byte-identical across two runs", compared)
                              : fmt::format("differs: {}", fmt::join(differing, ", "))};
}

Outcome confusion_identities() {
    Rng rng = make_rng(8, 0);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 1 + uniform_index(rng, 200);
        Labels y(n), p(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = static_cast<int>(uniform_index(rng, kNumClasses));
            p[i] = uniform01(rng) < 0.5 ? y[i] : static_cast<int>(uniform_index(rng, kNumClasses));
        }
        const ConfusionMatrix cm = confusion(y, p);
        worst = std::max(worst, std::abs(static_cast<double>(cm.trace()) / static_cast<double>(n) - accuracy(y, p)));
        for (int r = 0; r < kNumClasses; ++r) {
            if (!cm.supported[static_cast<std::size_t>(r)]) continue;
            double sum = 0.0;
            for (double v : cm.normalized[static_cast<std::size_t>(r)]) sum += v;
            worst = std::max(worst, std::abs(sum - 1.0));
        }
    }
    return {worst <= 1e-12, fmt::format("100 label vectors, max identity error {:.2e}", worst)};
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double budget_seconds;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "rmspe oracle equivalence", 1, rmspe_oracle},
        {2, "gradient checks", 30, gradient_checks},
        {3, "dual solver oracle", 120, dual_solver_oracle},
        {4, "k-means recovery", 10, kmeans_recovery},
        {5, "benchmark protocol anchors", 30, benchmark_anchors},
        {6, "desk-scale headline analog", 300, headline_analog},
        {7, "determinism", 300, determinism},
        {8, "confusion matrix identities", 1, confusion_identities},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, fmt::format("threw: {}", e.what())};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = seconds <= c.budget_seconds;
        const bool pass = o.pass && in_time;
        failures += !pass;
        std::cout << fmt::format("{} {}. {}: {} [{:.2f}s of {:.0f}s{}]", pass ? "PASS" : "FAIL", c.id, c.name, o.detail,
                                 seconds, c.budget_seconds, in_time ? "" : ", over budget")
                  << std::endl;
    }
    return failures;
}
