#include "concert/pipeline.hpp"

#include "concert/error.hpp"
#include "concert/random.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace concert {

void Hyperparameters::set_seed(std::uint64_t seed) {
    sgd.seed = seed;
    logistic.seed = seed;
    forest.seed = seed;
    mlp.seed = seed;
}

namespace {

bool as_bool(const Assignment& a, std::string_view name) {
    const auto* v = a.find(name);
    if (const auto* s = std::get_if<std::string>(v)) {
        if (*s == "true" || *s == "1") return true;
        if (*s == "false" || *s == "0") return false;
        fail(ErrorCode::invalid_argument, fmt::format("parameter {} is not a boolean: {}", name, *s));
    }
    return a.number(name) != 0.0;
}

std::size_t as_count(const Assignment& a, std::string_view name) {
    const auto v = a.integer(name);
    if (v < 0) fail(ErrorCode::invalid_argument, fmt::format("parameter {} must be non-negative", name));
    return static_cast<std::size_t>(v);
}

std::vector<std::size_t> parse_layers(const std::string& text) {
    std::vector<std::size_t> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto end = std::min(text.find_first_of("-x,", start), text.size());
        const auto value = parse_number(std::string_view(text).substr(start, end - start));
        if (!value || *value < 1 || *value != std::floor(*value))
            fail(ErrorCode::invalid_argument, fmt::format("hidden layer list '{}' is not like 64-16-16", text));
        out.push_back(static_cast<std::size_t>(*value));
        start = end + 1;
    }
    return out;
}

std::string join_layers(const std::vector<std::size_t>& layers) {
    return fmt::format("{}", fmt::join(layers, "-"));
}

}  // namespace

void apply_assignment(Hyperparameters& h, ModelFamily family, const Assignment& values) {
    for (const auto& [name, value] : values.values) {
        const auto unknown = [&, &name = name] {
            fail(ErrorCode::invalid_argument,
                 fmt::format("unknown hyperparameter '{}' for model family {}", name, to_string(family)));
        };
        switch (family) {
            case ModelFamily::sgd:
                if (name == "penalty") h.sgd.penalty = penalty_from_string(values.text(name));
                else if (name == "alpha") h.sgd.alpha = values.number(name);
                else if (name == "degree") h.sgd.degree = static_cast<int>(values.integer(name));
                else if (name == "eta0") h.sgd.eta0 = values.number(name);
                else if (name == "epochs") h.sgd.epochs = as_count(values, name);
                else if (name == "batch_size") h.sgd.batch_size = as_count(values, name);
                else unknown();
                break;
            case ModelFamily::svr:
                if (name == "C") h.svr.C = values.number(name);
                else if (name == "gamma") h.svr.gamma = values.number(name);
                else if (name == "epsilon") h.svr.epsilon = values.number(name);
                else unknown();
                break;
            case ModelFamily::logistic:
                if (name == "C") h.logistic.C = values.number(name);
                else if (name == "penalty") h.logistic.penalty = penalty_from_string(values.text(name));
                else if (name == "mode") h.logistic.mode = logistic_mode_from_string(values.text(name));
                else if (name == "pca_components") {
                    const auto k = as_count(values, name);
                    h.logistic.pca_components = k ? std::optional<std::size_t>(k) : std::nullopt;
                } else if (name == "learning_rate") h.logistic.learning_rate = values.number(name);
                else if (name == "epochs") h.logistic.epochs = as_count(values, name);
                else if (name == "batch_size") h.logistic.batch_size = as_count(values, name);
                else unknown();
                break;
            case ModelFamily::svc:
                if (name == "C") h.svc.C = values.number(name);
                else if (name == "gamma") h.svc.gamma = values.number(name);
                else unknown();
                break;
            case ModelFamily::forest:
                if (name == "n_trees") h.forest.n_trees = as_count(values, name);
                else if (name == "max_depth") {
                    const auto d = as_count(values, name);
                    h.forest.max_depth = d ? std::optional<std::size_t>(d) : std::nullopt;
                } else if (name == "min_samples_leaf") h.forest.min_samples_leaf = as_count(values, name);
                else if (name == "features_per_split") {
                    const auto f = as_count(values, name);
                    h.forest.features_per_split = f ? std::optional<std::size_t>(f) : std::nullopt;
                } else if (name == "bootstrap") h.forest.bootstrap = as_bool(values, name);
                else unknown();
                break;
            case ModelFamily::mlp:
                if (name == "learning_rate") h.mlp.learning_rate = values.number(name);
                else if (name == "epochs") h.mlp.epochs = as_count(values, name);
                else if (name == "batch_size") h.mlp.batch_size = as_count(values, name);
                else if (name == "hidden") h.mlp.hidden = parse_layers(values.text(name));
                else if (name == "dropout") {
                    const double p = values.number(name);
                    h.mlp.dropout = p > 0.0 ? std::vector<double>(h.mlp.hidden.size(), p) : std::vector<double>{};
                } else if (name == "patience") {
                    const auto p = as_count(values, name);
                    h.mlp.patience = p ? std::optional<std::size_t>(p) : std::nullopt;
                } else unknown();
                break;
        }
    }
    if (family == ModelFamily::mlp && !h.mlp.dropout.empty() && h.mlp.dropout.size() != h.mlp.hidden.size())
        h.mlp.dropout.assign(h.mlp.hidden.size(), h.mlp.dropout.front());
}

Assignment describe(const Hyperparameters& h, ModelFamily family) {
    Assignment a;
    const auto count = [](std::size_t v) { return ParamValue{static_cast<std::int64_t>(v)}; };
    const auto opt_count = [&](const std::optional<std::size_t>& v) { return count(v.value_or(0)); };
    switch (family) {
        case ModelFamily::sgd:
            a.values = {{"penalty", std::string(to_string(h.sgd.penalty))},
                        {"alpha", h.sgd.alpha},
                        {"degree", std::int64_t{h.sgd.degree}},
                        {"eta0", h.sgd.eta0},
                        {"epochs", count(h.sgd.epochs)},
                        {"batch_size", count(h.sgd.batch_size)}};
            break;
        case ModelFamily::svr:
            a.values = {{"C", h.svr.C}, {"gamma", h.svr.gamma}, {"epsilon", h.svr.epsilon}};
            break;
        case ModelFamily::logistic:
            a.values = {{"C", h.logistic.C},
                        {"penalty", std::string(to_string(h.logistic.penalty))},
                        {"mode", std::string(to_string(h.logistic.mode))},
                        {"pca_components", opt_count(h.logistic.pca_components)},
                        {"learning_rate", h.logistic.learning_rate},
                        {"epochs", count(h.logistic.epochs)},
                        {"batch_size", count(h.logistic.batch_size)}};
            break;
        case ModelFamily::svc:
            a.values = {{"C", h.svc.C}, {"gamma", h.svc.gamma}};
            break;
        case ModelFamily::forest:
            a.values = {{"n_trees", count(h.forest.n_trees)},
                        {"max_depth", opt_count(h.forest.max_depth)},
                        {"min_samples_leaf", count(h.forest.min_samples_leaf)},
                        {"features_per_split", opt_count(h.forest.features_per_split)},
                        {"bootstrap", std::string(h.forest.bootstrap ? "true" : "false")}};
            break;
        case ModelFamily::mlp:
            a.values = {{"hidden", join_layers(h.mlp.hidden)},
                        {"dropout", h.mlp.dropout.empty() ? 0.0 : h.mlp.dropout.front()},
                        {"learning_rate", h.mlp.learning_rate},
                        {"epochs", count(h.mlp.epochs)},
                        {"batch_size", count(h.mlp.batch_size)},
                        {"patience", opt_count(h.mlp.patience)}};
            break;
    }
    return a;
}

TaskData TaskData::take(const std::vector<std::size_t>& rows) const {
    TaskData out;
    out.x = x.take_rows(rows);
    if (!labels.empty()) out.labels = concert::take(labels, rows);
    if (price.size()) out.price = concert::take(price, rows);
    return out;
}

TaskData prepare_task(const RawTable& concerts, Task task) {
    const RawTable labeled = drop_missing(concerts, schema::target_for(task));
    if (labeled.row_count() == 0)
        fail(ErrorCode::missing_value, fmt::format("no rows with a {} value", schema::target_for(task)));
    const auto features = schema::features_for(task);
    const RawTable complete = impute_columns(labeled, features);
    TaskData data;
    data.x = encode_dummies(select_columns(complete, features), {});
    if (task == Task::location) data.labels = label_column(complete, schema::kClass);
    else data.price = numeric_column(complete, schema::kPrice);
    return data;
}

bool has_class_labels(const RawTable& concerts) {
    const auto col = concerts.find_column(schema::kClass);
    if (!col) return false;
    return std::all_of(concerts.rows.begin(), concerts.rows.end(), [&](const auto& row) { return row[*col].has_value(); });
}

RawTable relabel_classes(const RawTable& concerts, const KMeansModel& model) {
    const std::vector<std::string> city_columns{std::string(schema::kIncome), std::string(schema::kDensity),
                                                std::string(schema::kPopulation)};
    const RawTable complete = impute_columns(concerts, city_columns);
    const Vector income = numeric_column(complete, schema::kIncome);
    const Vector density = numeric_column(complete, schema::kDensity);
    const Vector population = numeric_column(complete, schema::kPopulation);
    RawTable out = concerts;
    std::size_t col;
    if (auto c = out.find_column(schema::kClass)) {
        col = *c;
    } else {
        col = out.columns.size();
        out.columns.emplace_back(schema::kClass);
        for (auto& row : out.rows) row.emplace_back();
    }
    for (std::size_t r = 0; r < out.row_count(); ++r) {
        const auto i = static_cast<Eigen::Index>(r);
        CityFeatures city{"", income(i), density(i), population(i)};
        out.rows[r][col] = fmt::format("{}", assign_class(city, model));
    }
    return out;
}

namespace {

std::map<std::string, double> column_defaults(const FeatureMatrix& x) {
    std::map<std::string, double> out;
    for (std::size_t c = 0; c < x.cols(); ++c) {
        std::vector<double> v(x.rows());
        for (std::size_t r = 0; r < x.rows(); ++r) v[r] = x.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        std::sort(v.begin(), v.end());
        double value;
        if (x.column_kinds[c] == ColumnKind::continuous) {
            const std::size_t n = v.size();
            value = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
        } else {
            // Mode, ties to the smallest value.
            value = v.front();
            std::size_t best = 0;
            for (std::size_t i = 0; i < v.size();) {
                std::size_t j = i;
                while (j < v.size() && v[j] == v[i]) ++j;
                if (j - i > best) {
                    best = j - i;
                    value = v[i];
                }
                i = j;
            }
        }
        out[x.column_names[c]] = value;
    }
    return out;
}

void check_family(Task task, ModelFamily family) {
    if ((task == Task::location) != is_classifier(family))
        fail(ErrorCode::unsupported, fmt::format("model family {} cannot be used for the {} task", to_string(family),
                                                 task == Task::location ? "location" : "price"));
}

Vector log_targets(const Vector& price) {
    Vector out(price.size());
    for (Eigen::Index i = 0; i < price.size(); ++i) {
        if (!(price(i) > 0.0)) fail(ErrorCode::invalid_argument, fmt::format("price {} is not positive", price(i)));
        out(i) = std::log(price(i));
    }
    return out;
}

// Targets on the modeling scale.
Vector predict_target(const TaskEntry& entry, const FeatureMatrix& raw) {
    const FeatureMatrix z = transform_features(entry, raw);
    if (const auto* m = std::get_if<SgdRegressor>(&entry.model)) return m->predict(z);
    if (const auto* m = std::get_if<SvrModel>(&entry.model)) return m->predict(z);
    fail(ErrorCode::unsupported, "the price task needs an sgd or svr model");
}

}  // namespace

FeatureMatrix transform_features(const TaskEntry& entry, const FeatureMatrix& raw) {
    if (raw.column_names != entry.feature_columns)
        fail(ErrorCode::schema_mismatch, "input columns differ from the columns the model was trained on");
    return apply_minmax(log_transform(raw, entry.log_spec), entry.scaler);
}

Matrix predict_proba(const TaskEntry& entry, const FeatureMatrix& raw) {
    const FeatureMatrix z = transform_features(entry, raw);
    Matrix p;
    if (const auto* m = std::get_if<LogisticModel>(&entry.model)) p = logistic_predict_proba(*m, z);
    else if (const auto* m = std::get_if<RandomForest>(&entry.model)) p = forest_predict_proba(*m, z);
    else if (const auto* m = std::get_if<MlpModel>(&entry.model)) p = mlp_predict_proba(*m, z);
    else if (const auto* m = std::get_if<SvcModel>(&entry.model)) {
        const Labels y = svc_predict(*m, z);
        p = Matrix::Zero(z.values.rows(), kNumClasses);
        for (std::size_t i = 0; i < y.size(); ++i) p(static_cast<Eigen::Index>(i), y[i]) = 1.0;
    } else {
        fail(ErrorCode::unsupported, "the location task needs a classifier");
    }
    for (Eigen::Index r = 0; r < p.rows(); ++r) p.row(r) /= p.row(r).sum();
    return p;
}

Labels predict_labels(const TaskEntry& entry, const FeatureMatrix& raw) {
    if (const auto* m = std::get_if<SvcModel>(&entry.model)) return svc_predict(*m, transform_features(entry, raw));
    if (const auto* m = std::get_if<RandomForest>(&entry.model)) return forest_predict(*m, transform_features(entry, raw));
    return argmax_rows(predict_proba(entry, raw));
}

Vector predict_price(const TaskEntry& entry, const FeatureMatrix& raw) {
    Vector y = predict_target(entry, raw);
    if (entry.target_log) y = y.array().exp();
    return y;
}

TaskEntry fit_entry(const TaskData& train, Task task, ModelFamily family, const Hyperparameters& h,
                    const PipelineOptions& options) {
    check_family(task, family);
    Hyperparameters hp = h;
    hp.set_seed(options.seed);
    hp.forest.threads = options.threads;

    TaskEntry entry;
    entry.task = task;
    entry.family = family;
    entry.feature_columns = train.x.column_names;
    entry.feature_kinds = train.x.column_kinds;
    entry.defaults = column_defaults(train.x);
    entry.log_spec = default_log_spec(train.x);
    const FeatureMatrix logged = log_transform(train.x, entry.log_spec);
    entry.scaler = fit_minmax(logged);
    FeatureMatrix z = apply_minmax(logged, entry.scaler);

    if (task == Task::price) {
        entry.target_log = true;
        const Vector y = log_targets(train.price);
        if (family == ModelFamily::sgd) entry.model = sgd_fit(z, y, hp.sgd);
        else entry.model = svr_fit(z, y, hp.svr);
        return entry;
    }

    Labels y = train.labels;
    const auto balance = [&](FeatureMatrix& fx, Labels& fy, std::uint64_t stream) {
        if (!options.oversample) return;
        auto o = oversample(fx, fy, derive_seed(options.seed, stream));
        fx = std::move(o.x);
        fy = std::move(o.y);
    };
    switch (family) {
        case ModelFamily::logistic:
            balance(z, y, 0x05a);
            entry.model = logistic_fit(z, y, hp.logistic);
            break;
        case ModelFamily::svc:
            balance(z, y, 0x05a);
            entry.model = svc_fit(z, y, hp.svc, options.threads);
            break;
        case ModelFamily::forest:
            balance(z, y, 0x05a);
            entry.model = forest_fit(z, y, hp.forest);
            break;
        case ModelFamily::mlp: {
            if (!hp.mlp.patience) {
                balance(z, y, 0x05a);
                entry.model = mlp_train(z, y, hp.mlp);
                break;
            }
            const auto inner = split_indices(z.rows(), {0.2, derive_seed(options.seed, 0x7a1)});
            FeatureMatrix fit_x = z.take_rows(inner.train), val_x = z.take_rows(inner.test);
            Labels fit_y = concert::take(y, inner.train), val_y = concert::take(y, inner.test);
            balance(fit_x, fit_y, 0x05a);
            entry.model = mlp_train(fit_x, fit_y, hp.mlp, {&val_x, &val_y});
            break;
        }
        case ModelFamily::sgd:
        case ModelFamily::svr: break;
    }
    return entry;
}

double score_entry(const TaskEntry& entry, const TaskData& data) {
    if (entry.task == Task::location) return accuracy(data.labels, predict_labels(entry, data.x));
    return rmspe(log_targets(data.price), predict_target(entry, data.x));
}

ConstantScores constant_scores(const TaskData& data, const SplitIndices& split) {
    const Vector log_all = log_targets(data.price);
    const Vector train_y = concert::take(log_all, split.train);
    const Vector test_y = concert::take(log_all, split.test);
    const ConstantBaseline b = constant_baseline(train_y, true);
    ConstantScores s;
    s.value = b.value;
    s.price_value = b.price_scale;
    s.full_set_price_value = std::exp(log_all.mean());
    s.train_rmspe = rmspe(train_y, b.predict(split.train.size()));
    s.test_rmspe = rmspe(test_y, b.predict(split.test.size()));
    s.test_rmspe_price = rmspe(concert::take(data.price, split.test),
                               Vector::Constant(static_cast<Eigen::Index>(split.test.size()), *b.price_scale));
    return s;
}

TrainOutcome train_task(const TaskData& data, Task task, ModelFamily family, const Hyperparameters& h,
                        const PipelineOptions& options, bool with_upper_bound) {
    check_family(task, family);
    TrainOutcome out;
    out.split = split_indices(data.rows(), {options.test_fraction, options.seed});
    const TaskData train = data.take(out.split.train);
    const TaskData test = data.take(out.split.test);
    out.entry = fit_entry(train, task, family, h, options);
    auto& scores = out.entry.scores;

    if (task == Task::location) {
        auto& c = out.classification;
        c.model = std::string(to_string(family));
        c.train_accuracy = score_entry(out.entry, train);
        const Labels predicted = predict_labels(out.entry, test.x);
        c.test_accuracy = accuracy(test.labels, predicted);
        c.test_confusion = confusion(test.labels, predicted);
        const auto guess = random_guess_baseline(kNumClasses, options.seed);
        c.lower_bound = guess.expected_accuracy();
        c.random_guess_test_accuracy = accuracy(test.labels, guess.predict(test.rows()));
        c.improvement_ratio = c.test_accuracy / c.lower_bound;
        if (with_upper_bound)
            c.upper_bound = overfit_upper_bound(family, transform_features(out.entry, train.x), train.labels,
                                                options.seed);
        scores["train_accuracy"] = c.train_accuracy;
        scores["test_accuracy"] = c.test_accuracy;
        scores["lower_bound"] = c.lower_bound;
        scores["improvement_ratio"] = c.improvement_ratio;
        if (c.upper_bound) scores["upper_bound"] = *c.upper_bound;
    } else {
        auto& r = out.regression;
        r.model = std::string(to_string(family));
        r.train_rmspe = score_entry(out.entry, train);
        r.test_rmspe = score_entry(out.entry, test);
        r.train_rmspe_price = rmspe(train.price, predict_price(out.entry, train.x));
        r.test_rmspe_price = rmspe(test.price, predict_price(out.entry, test.x));
        out.constant = constant_scores(data, out.split);
        scores["train_rmspe"] = r.train_rmspe;
        scores["test_rmspe"] = r.test_rmspe;
        scores["train_rmspe_price"] = r.train_rmspe_price;
        scores["test_rmspe_price"] = r.test_rmspe_price;
        scores["constant_test_rmspe"] = out.constant->test_rmspe;
    }
    return out;
}

SearchPlan default_search_plan(ModelFamily family) {
    SearchPlan plan;
    auto& s = plan.space;
    const auto doubles = [](std::initializer_list<double> v) { return std::vector<ParamValue>(v.begin(), v.end()); };
    const auto ints = [](std::initializer_list<std::int64_t> v) { return std::vector<ParamValue>(v.begin(), v.end()); };
    switch (family) {
        case ModelFamily::sgd:
            plan.method = SearchMethod::grid;
            s.add_list("penalty", {std::string("l1"), std::string("l2")});
            s.add_list("alpha", doubles({1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0}));
            s.add_list("degree", ints({0, 1, 2}));
            break;
        case ModelFamily::svr:
            plan.method = SearchMethod::grid;
            s.add_list("C", doubles({0.1, 0.5, 2.0}));
            s.add_list("gamma", doubles({0.001, 0.01, 0.1}));
            s.add_list("epsilon", doubles({0.1, 0.5, 2.0}));
            break;
        case ModelFamily::logistic:
            s.add_range("C", 1e-3, 1e2, SamplingLaw::log_uniform);
            s.add_list("penalty", {std::string("l1"), std::string("l2")});
            s.add_list("mode", {std::string("ovr"), std::string("multinomial")});
            s.add_list("pca_components", ints({0, 10}));
            break;
        case ModelFamily::svc:
            plan.method = SearchMethod::grid;
            s.add_list("C", doubles({0.1, 1.0, 10.0, 100.0}));
            s.add_list("gamma", doubles({0.001, 0.01, 0.1, 1.0}));
            break;
        case ModelFamily::forest:
            s.add_range("n_trees", 55, 155, SamplingLaw::integer_uniform);
            s.add_range("max_depth", 10, 60, SamplingLaw::integer_uniform);
            s.add_range("min_samples_leaf", 1, 20, SamplingLaw::integer_uniform);
            break;
        case ModelFamily::mlp:
            s.add_range("learning_rate", 1e-3, 1e-1, SamplingLaw::log_uniform);
            s.add_list("dropout", doubles({0.0, 0.2, 0.4}));
            break;
    }
    return plan;
}

TuneOutcome tune_task(const TaskData& data, Task task, ModelFamily family, const Hyperparameters& base,
                      const SearchPlan& plan, const PipelineOptions& options) {
    check_family(task, family);
    const auto outer = split_indices(data.rows(), {options.test_fraction, options.seed});
    const TaskData train = data.take(outer.train);
    const auto inner = split_indices(train.rows(), {0.2, derive_seed(options.seed, 0x70e)});
    const TaskData fit_part = train.take(inner.train);
    const TaskData val_part = train.take(inner.test);

    const Evaluate evaluate = [&](const Assignment& a, std::uint64_t trial_seed) {
        Hyperparameters h = base;
        apply_assignment(h, family, a);
        PipelineOptions o = options;
        o.seed = trial_seed;
        o.threads = 1;
        const TaskEntry entry = fit_entry(fit_part, task, family, h, o);
        TrialOutcome outcome;
        outcome.score = score_entry(entry, val_part);
        return outcome;
    };
    SearchOptions so;
    so.objective = task == Task::location ? Objective::maximize : Objective::minimize;
    so.seed = options.seed;
    so.threads = options.threads;

    TuneOutcome out;
    out.search = plan.method == SearchMethod::grid ? grid_search(plan.space, evaluate, so)
                                                   : random_search(plan.space, plan.trials, evaluate, so);
    out.best = base;
    apply_assignment(out.best, family, out.search.best.params);
    out.final = train_task(data, task, family, out.best, options);
    return out;
}

std::vector<ClassProfile> class_profiles(const RawTable& concerts) {
    std::vector<ClassProfile> out(kNumClasses);
    const auto cls = concerts.column_index(schema::kClass);
    const auto inc = concerts.column_index(schema::kIncome);
    const auto den = concerts.column_index(schema::kDensity);
    for (const auto& row : concerts.rows) {
        if (!row[cls] || !row[inc] || !row[den]) continue;
        const auto k = parse_number(*row[cls]);
        const auto income = parse_number(*row[inc]);
        const auto density = parse_number(*row[den]);
        if (!k || !income || !density || *k < 0 || *k >= kNumClasses) continue;
        auto& p = out[static_cast<std::size_t>(*k)];
        ++p.count;
        p.income += *income;
        p.density += *density;
    }
    for (auto& p : out)
        if (p.count) {
            p.income /= static_cast<double>(p.count);
            p.density /= static_cast<double>(p.count);
        }
    return out;
}

}  // namespace concert
