#include "concert/evaluation.hpp"

#include "concert/error.hpp"
#include "concert/forest.hpp"
#include "concert/kernel_machines.hpp"
#include "concert/linear_models.hpp"
#include "concert/mlp.hpp"
#include "concert/random.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace concert {

namespace {

void check_label_range(const Labels& y, const char* what) {
    for (int label : y)
        if (label < 0 || label >= kNumClasses)
            fail(ErrorCode::invalid_argument, fmt::format("{} label {} outside 0..4", what, label));
}

}  // namespace

double accuracy(const Labels& y, const Labels& predicted) {
    if (y.size() != predicted.size())
        fail(ErrorCode::invalid_argument,
             fmt::format("accuracy of {} labels against {} predictions", y.size(), predicted.size()));
    if (y.empty()) fail(ErrorCode::invalid_argument, "accuracy of an empty label list");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < y.size(); ++i) hits += y[i] == predicted[i];
    return static_cast<double>(hits) / static_cast<double>(y.size());
}

std::size_t ConfusionMatrix::total() const {
    std::size_t n = 0;
    for (const auto& row : counts) n += std::accumulate(row.begin(), row.end(), std::size_t{0});
    return n;
}

std::size_t ConfusionMatrix::trace() const {
    std::size_t n = 0;
    for (std::size_t k = 0; k < counts.size(); ++k) n += counts[k][k];
    return n;
}

ConfusionMatrix confusion(const Labels& y, const Labels& predicted) {
    if (y.size() != predicted.size())
        fail(ErrorCode::invalid_argument,
             fmt::format("confusion of {} labels against {} predictions", y.size(), predicted.size()));
    check_label_range(y, "true");
    check_label_range(predicted, "predicted");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < y.size(); ++i)
        ++cm.counts[static_cast<std::size_t>(y[i])][static_cast<std::size_t>(predicted[i])];
    for (std::size_t r = 0; r < cm.counts.size(); ++r) {
        const auto support = std::accumulate(cm.counts[r].begin(), cm.counts[r].end(), std::size_t{0});
        cm.supported[r] = support > 0;
        for (std::size_t c = 0; c < cm.counts[r].size(); ++c)
            cm.normalized[r][c] =
                support ? static_cast<double>(cm.counts[r][c]) / static_cast<double>(support) : 0.0;
    }
    return cm;
}

std::string confusion_csv(const ConfusionMatrix& cm, bool normalized) {
    std::string out = "true\\predicted";
    for (int k = 0; k < kNumClasses; ++k) out += fmt::format(",{}", k);
    out += '\n';
    for (std::size_t r = 0; r < cm.counts.size(); ++r) {
        out += fmt::format("{}", r);
        for (std::size_t c = 0; c < cm.counts[r].size(); ++c)
            out += normalized ? "," + format_number(cm.normalized[r][c]) : fmt::format(",{}", cm.counts[r][c]);
        out += '\n';
    }
    return out;
}

ConstantBaseline constant_baseline(const Vector& y_train, bool log_targets) {
    if (y_train.size() == 0) fail(ErrorCode::invalid_argument, "constant baseline of an empty target vector");
    if (!log_targets && (y_train.array() <= 0.0).any())
        fail(ErrorCode::invalid_argument, "constant baseline needs positive targets");
    ConstantBaseline b;
    b.value = y_train.mean();
    if (log_targets) b.price_scale = std::exp(b.value);
    return b;
}

Labels RandomGuessClassifier::predict(std::size_t rows) const {
    Rng rng = make_rng(seed, 0x9e55);
    Labels out(rows);
    for (auto& label : out) label = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(n_classes)));
    return out;
}

RandomGuessClassifier random_guess_baseline(int n_classes, std::uint64_t seed) {
    if (n_classes < 2) fail(ErrorCode::invalid_argument, "random guessing needs at least two classes");
    return {n_classes, seed};
}

std::string_view to_string(ModelFamily family) noexcept {
    switch (family) {
        case ModelFamily::sgd: return "sgd";
        case ModelFamily::svr: return "svr";
        case ModelFamily::logistic: return "logistic";
        case ModelFamily::svc: return "svc";
        case ModelFamily::forest: return "forest";
        case ModelFamily::mlp: return "mlp";
    }
    return "sgd";
}

ModelFamily model_family_from_string(std::string_view text) {
    for (auto f : {ModelFamily::sgd, ModelFamily::svr, ModelFamily::logistic, ModelFamily::svc, ModelFamily::forest,
                   ModelFamily::mlp})
        if (to_string(f) == text) return f;
    if (text == "linear") return ModelFamily::sgd;
    if (text == "rf" || text == "random_forest") return ModelFamily::forest;
    fail(ErrorCode::invalid_argument,
         fmt::format("unknown model family '{}' (expected sgd, svr, logistic, svc, forest or mlp)", text));
}

bool is_classifier(ModelFamily family) noexcept {
    return family != ModelFamily::sgd && family != ModelFamily::svr;
}

double overfit_upper_bound(ModelFamily family, const FeatureMatrix& x, const Labels& y, std::uint64_t seed) {
    switch (family) {
        case ModelFamily::forest: {
            ForestConfig c;
            c.n_trees = 10;
            c.max_depth.reset();
            c.min_samples_leaf = 1;
            c.features_per_split = x.cols();
            c.bootstrap = false;
            c.seed = seed;
            return accuracy(y, forest_predict(forest_fit(x, y, c), x));
        }
        case ModelFamily::mlp: {
            MlpConfig c;
            c.epochs = 1000;
            c.seed = seed;
            return accuracy(y, mlp_predict(mlp_train(x, y, c), x));
        }
        case ModelFamily::logistic: {
            LogisticConfig c;
            c.C = 1e6;
            c.penalty = Penalty::l2;
            c.epochs = 300;
            c.seed = seed;
            return accuracy(y, logistic_predict(logistic_fit(x, y, c), x));
        }
        case ModelFamily::svc: {
            SvcConfig c;
            c.C = 1e4;
            c.gamma = 1.0;
            return accuracy(y, svc_predict(svc_fit(x, y, c), x));
        }
        case ModelFamily::sgd:
        case ModelFamily::svr: break;
    }
    fail(ErrorCode::unsupported, fmt::format("model family {} has no memorization preset", to_string(family)));
}

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json confusion_json(const ConfusionMatrix& cm) {
    ordered_json j;
    j["counts"] = cm.counts;
    j["normalized"] = cm.normalized;
    j["supported"] = cm.supported;
    return j;
}

std::string pct(double x) { return fmt::format("{:.1f}%", 100.0 * x); }

}  // namespace

std::string report_json(const BenchmarkReport& report) {
    ordered_json j;
    j["task"] = report.task == Task::location ? "location" : "price";
    j["seed"] = report.seed;
    j["train_rows"] = report.train_rows;
    j["test_rows"] = report.test_rows;
    if (report.task == Task::location) {
        ordered_json rows = ordered_json::array();
        for (const auto& s : report.classifiers) {
            ordered_json r;
            r["model"] = s.model;
            r["train_accuracy"] = s.train_accuracy;
            r["test_accuracy"] = s.test_accuracy;
            r["lower_bound"] = s.lower_bound;
            r["random_guess_test_accuracy"] = s.random_guess_test_accuracy;
            r["upper_bound"] = s.upper_bound ? ordered_json(*s.upper_bound) : ordered_json(nullptr);
            r["improvement_ratio"] = s.improvement_ratio;
            r["test_confusion"] = confusion_json(s.test_confusion);
            rows.push_back(std::move(r));
        }
        j["classifiers"] = std::move(rows);
    } else {
        ordered_json rows = ordered_json::array();
        for (const auto& s : report.regressors) {
            ordered_json r;
            r["model"] = s.model;
            r["train_rmspe"] = s.train_rmspe;
            r["test_rmspe"] = s.test_rmspe;
            r["train_rmspe_price"] = s.train_rmspe_price;
            r["test_rmspe_price"] = s.test_rmspe_price;
            rows.push_back(std::move(r));
        }
        j["regressors"] = std::move(rows);
        if (report.constant) {
            const auto& c = *report.constant;
            ordered_json r;
            r["value"] = c.value;
            r["price_value"] = c.price_value ? ordered_json(*c.price_value) : ordered_json(nullptr);
            r["full_set_price_value"] =
                c.full_set_price_value ? ordered_json(*c.full_set_price_value) : ordered_json(nullptr);
            r["train_rmspe"] = c.train_rmspe;
            r["test_rmspe"] = c.test_rmspe;
            r["test_rmspe_price"] = c.test_rmspe_price;
            j["constant_baseline"] = std::move(r);
        }
    }
    return j.dump(2) + "\n";
}

std::string report_table(const BenchmarkReport& report) {
    std::string out;
    if (report.task == Task::location) {
        out += fmt::format("{:<22}{:>12}{:>12}{:>12}{:>12}{:>12}\n", "Model", "Train acc", "Test acc", "Low",
                           "High", "Ratio");
        for (const auto& s : report.classifiers)
            out += fmt::format("{:<22}{:>12}{:>12}{:>12}{:>12}{:>12}\n", s.model, pct(s.train_accuracy),
                               pct(s.test_accuracy), pct(s.lower_bound),
                               s.upper_bound ? pct(*s.upper_bound) : std::string("-"), pct(s.improvement_ratio));
    } else {
        out += fmt::format("{:<22}{:>14}{:>14}{:>16}\n", "Model", "Train RMSPE", "Test RMSPE", "Test RMSPE ($)");
        for (const auto& s : report.regressors)
            out += fmt::format("{:<22}{:>14.4f}{:>14.4f}{:>16.4f}\n", s.model, s.train_rmspe, s.test_rmspe,
                               s.test_rmspe_price);
        if (report.constant) {
            const auto& c = *report.constant;
            out += fmt::format("{:<22}{:>14.4f}{:>14.4f}{:>16.4f}\n", "constant", c.train_rmspe, c.test_rmspe,
                               c.test_rmspe_price);
            if (c.price_value) out += fmt::format("constant price (train split): {:.3f}\n", *c.price_value);
            if (c.full_set_price_value)
                out += fmt::format("constant price (full set):    {:.3f}\n", *c.full_set_price_value);
        }
    }
    out += fmt::format("rows: {} train / {} test, seed {}\n", report.train_rows, report.test_rows, report.seed);
    return out;
}

int planted_class(double concert_popularity) {
    const int k = static_cast<int>(std::floor(concert_popularity * 5.0 + 1e-9));
    return std::clamp(k, 0, kNumClasses - 1);
}

namespace {

double standard_normal(Rng& rng) {
    // Box-Muller keeps the stream identical across standard libraries.
    const double u1 = 1.0 - uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double round_to(double x, int decimals) {
    const double scale = std::pow(10.0, decimals);
    return std::round(x * scale) / scale;
}

int weighted_class(Rng& rng, const std::array<double, kNumClasses>& weights, double total) {
    double u = uniform01(rng) * total;
    for (int k = 0; k < kNumClasses; ++k) {
        u -= weights[static_cast<std::size_t>(k)];
        if (u < 0.0) return k;
    }
    return kNumClasses - 1;
}

struct City {
    std::string name;
    double income, density, population, latitude, longitude;
};

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    if (spec.rows < 2) fail(ErrorCode::invalid_argument, "synthetic data needs at least 2 rows");
    if (spec.label_noise < 0.0 || spec.label_noise > 1.0)
        fail(ErrorCode::invalid_argument, fmt::format("label noise {} outside [0,1]", spec.label_noise));
    if (spec.cities_per_class < 1) fail(ErrorCode::invalid_argument, "need at least one city per class");
    if (!(spec.log_price_sd >= 0.0)) fail(ErrorCode::invalid_argument, "log price sd must be non-negative");
    double weight_total = 0.0;
    for (double w : spec.class_weights) {
        if (!(w >= 0.0)) fail(ErrorCode::invalid_argument, "class weights must be non-negative");
        weight_total += w;
    }
    if (!(weight_total > 0.0)) fail(ErrorCode::invalid_argument, "class weights sum to zero");

    Rng city_rng = make_rng(spec.seed, 0xc17);
    std::vector<std::vector<City>> cities(kNumClasses);
    SyntheticData out;
    out.cities.columns = {"city", "income_per_capita", "population_density", "population"};
    for (int k = 0; k < kNumClasses; ++k) {
        for (std::size_t i = 0; i < spec.cities_per_class; ++i) {
            City c;
            c.name = fmt::format("city_{}_{}", k, i);
            c.income = round_to(20000.0 + 10000.0 * k + 1500.0 * (2.0 * uniform01(city_rng) - 1.0), 0);
            c.density = round_to(500.0 + 800.0 * k + 120.0 * (2.0 * uniform01(city_rng) - 1.0), 1);
            c.population = round_to(std::exp(11.0 + 1.5 * uniform01(city_rng)), 0);
            c.latitude = round_to(30.0 + 15.0 * uniform01(city_rng), 4);
            c.longitude = round_to(-120.0 + 45.0 * uniform01(city_rng), 4);
            out.cities.rows.push_back({c.name, format_number(c.income), format_number(c.density),
                                       format_number(c.population)});
            cities[static_cast<std::size_t>(k)].push_back(std::move(c));
        }
    }

    // Fixed genre and weekday price effects, used only when price_signal > 0.
    std::array<double, schema::kGenreCount> genre_effect{};
    for (std::size_t g = 0; g < genre_effect.size(); ++g)
        genre_effect[g] = (static_cast<double>(g) - 9.5) / 9.5;
    constexpr std::array<double, schema::kDayCount> day_effect{0.3, -0.5, -0.4, -0.2, 0.0, 0.5, 0.6};

    Rng rng = make_rng(spec.seed, 0x5e7);
    std::vector<ConcertRecord> records;
    records.reserve(spec.rows);
    out.log_price.resize(static_cast<Eigen::Index>(spec.rows));
    for (std::size_t i = 0; i < spec.rows; ++i) {
        ConcertRecord r;
        const int planted = weighted_class(rng, spec.class_weights, weight_total);
        int label = planted;
        if (uniform01(rng) < spec.label_noise) {
            const auto other = static_cast<int>(uniform_index(rng, kNumClasses - 1));
            label = other >= planted ? other + 1 : other;
        }
        r.concert_popularity = round_to(0.2 * planted + 0.01 * static_cast<double>(uniform_index(rng, 20)), 2);
        const auto& city = cities[static_cast<std::size_t>(label)][uniform_index(rng, spec.cities_per_class)];
        r.class_label = label;
        r.latitude = city.latitude;
        r.longitude = city.longitude;
        r.population_estimate_2017 = city.population;
        r.estimated_per_capita_income = city.income;
        r.population_density = city.density;
        r.playcount = round_to(std::exp(10.0 + 1.5 * standard_normal(rng)), 0);
        r.market_heat = round_to(100.0 * uniform01(rng), 2);

        const std::size_t n_genres = 1 + uniform_index(rng, 3);
        double signal = 0.0;
        for (std::size_t g = 0; g < n_genres; ++g) {
            std::size_t pick = uniform_index(rng, schema::kGenreCount);
            while (r.genres[pick]) pick = (pick + 1) % schema::kGenreCount;
            r.genres[pick] = 1;
            signal += genre_effect[pick];
        }
        r.genres_num = static_cast<double>(n_genres);
        const std::size_t day = uniform_index(rng, schema::kDayCount);
        r.days[day] = 1;
        signal += day_effect[day];
        r.venue_type = 1 + static_cast<int>(uniform_index(rng, 3));
        r.venue_concert_count = static_cast<double>(1 + uniform_index(rng, 50));

        const double log_price = spec.log_price_mean + spec.price_signal * signal + spec.log_price_sd * standard_normal(rng);
        const double price = round_to(std::exp(log_price), 2);
        r.average_price = std::max(price, 0.01);
        out.log_price(static_cast<Eigen::Index>(i)) = std::log(*r.average_price);
        out.planted.push_back(planted);
        out.labels.push_back(label);
        records.push_back(r);
    }
    out.concerts = concerts_to_table(records);
    return out;
}

}  // namespace concert
