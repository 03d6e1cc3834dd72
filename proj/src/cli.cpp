#include "concert/cli.hpp"

#include "concert/bundle.hpp"
#include "concert/error.hpp"
#include "concert/service.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <csignal>
#include <cstdlib>
#include <iostream>

namespace concert {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

struct Settings {
    std::uint64_t seed = 42;
    double test_fraction = 0.2;
    bool oversample = true;
    unsigned threads = 0;
    std::string preset = "default";
    std::string task = "location";
    std::string model;  // empty: forest for location, price_model for price
    std::string price_model = "sgd";
    Hyperparameters hyper;
    json search;  // optional overrides of the search plan
};

ParamValue param_from_json(const json& v, const std::string& name) {
    if (v.is_number_integer()) return v.get<std::int64_t>();
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return std::string(v.get<bool>() ? "true" : "false");
    fail(ErrorCode::invalid_argument, fmt::format("config value of {} must be a number, string or boolean", name));
}

Settings load_settings(const std::string& config_path) {
    Settings s;
    if (config_path.empty()) return s;
    json j;
    try {
        j = json::parse(read_file(config_path));
    } catch (const json::exception& e) {
        fail(ErrorCode::invalid_argument, fmt::format("config {} is not valid JSON: {}", config_path, e.what()));
    }
    if (!j.is_object()) fail(ErrorCode::invalid_argument, "config must be a JSON object");
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "seed") s.seed = value.get<std::uint64_t>();
            else if (key == "test_fraction") s.test_fraction = value.get<double>();
            else if (key == "oversample") s.oversample = value.get<bool>();
            else if (key == "threads") s.threads = value.get<unsigned>();
            else if (key == "preset") s.preset = value.get<std::string>();
            else if (key == "task") s.task = value.get<std::string>();
            else if (key == "model") s.model = value.get<std::string>();
            else if (key == "price_model") s.price_model = value.get<std::string>();
            else if (key == "search") s.search = value;
            else if (key == "hyperparameters") {
                for (const auto& [family, params] : value.items()) {
                    Assignment a;
                    for (const auto& [name, v] : params.items()) a.values.emplace_back(name, param_from_json(v, name));
                    apply_assignment(s.hyper, model_family_from_string(family), a);
                }
            } else {
                fail(ErrorCode::invalid_argument, fmt::format("unknown config key '{}'", key));
            }
        }
    } catch (const json::exception& e) {
        fail(ErrorCode::invalid_argument, fmt::format("config {}: {}", config_path, e.what()));
    }
    return s;
}

SearchPlan search_plan(ModelFamily family, const json& overrides) {
    SearchPlan plan = default_search_plan(family);
    if (overrides.is_null()) return plan;
    try {
        if (overrides.contains("method")) {
            const auto m = overrides.at("method").get<std::string>();
            if (m == "grid") plan.method = SearchMethod::grid;
            else if (m == "random") plan.method = SearchMethod::random;
            else fail(ErrorCode::invalid_argument, fmt::format("unknown search method '{}'", m));
        }
        if (overrides.contains("trials")) plan.trials = overrides.at("trials").get<std::size_t>();
        if (overrides.contains("space")) {
            plan.space = ParamSpace{};
            for (const auto& [name, dim] : overrides.at("space").items()) {
                if (dim.is_array()) {
                    std::vector<ParamValue> values;
                    for (const auto& v : dim) values.push_back(param_from_json(v, name));
                    plan.space.add_list(name, std::move(values));
                } else {
                    plan.space.add_range(name, dim.at("low").get<double>(), dim.at("high").get<double>(),
                                         sampling_law_from_string(dim.value("law", std::string("uniform"))));
                }
            }
        }
    } catch (const json::exception& e) {
        fail(ErrorCode::invalid_argument, fmt::format("search config: {}", e.what()));
    }
    return plan;
}

ModelFamily family_for(const Settings& s, Task task) {
    if (task == Task::location) return model_family_from_string(s.model.empty() ? "forest" : s.model);
    return model_family_from_string(s.model.empty() ? s.price_model : s.model);
}

Task parse_task(const std::string& text) {
    if (text == "location") return Task::location;
    if (text == "price") return Task::price;
    fail(ErrorCode::invalid_argument, fmt::format("unknown task '{}' (expected location or price)", text));
}

PipelineOptions pipeline_options(const Settings& s) {
    PipelineOptions o;
    o.seed = s.seed;
    o.test_fraction = s.test_fraction;
    o.oversample = s.oversample;
    o.threads = s.threads;
    return o;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto end = std::min(text.find(',', start), text.size());
        if (end > start) out.push_back(text.substr(start, end - start));
        start = end + 1;
    }
    return out;
}

struct LoadedData {
    RawTable table;
    std::string bytes;
    std::optional<KMeansModel> kmeans;
};

KMeansModel fit_cities(const std::vector<CityFeatures>& cities, const Settings& s) {
    KMeansConfig kc;
    kc.seed = s.seed;
    kc.threads = s.threads;
    return kmeans_fit(cities, kc);
}

// Concert table with class labels, clustering cities when labels are absent
// or a city table is supplied.
LoadedData load_concerts(const std::string& input, const std::string& cities, const Settings& s) {
    LoadedData d;
    d.bytes = read_file(input);
    d.table = parse_csv(d.bytes, concert_csv_schema());
    if (!cities.empty()) {
        d.kmeans = fit_cities(cities_from_table(load_csv(cities, city_csv_schema())), s);
        d.table = relabel_classes(d.table, *d.kmeans);
    } else if (!has_class_labels(d.table)) {
        d.kmeans = fit_cities(cities_from_concerts(d.table), s);
        d.table = relabel_classes(d.table, *d.kmeans);
    }
    return d;
}

void write_report(const std::string& path, const BenchmarkReport& report) {
    if (path.empty()) return;
    write_file(path, report_json(report));
    write_file(fs::path(path).replace_extension(".txt"), report_table(report));
}

BenchmarkReport report_for(const TrainOutcome& t, Task task, std::uint64_t seed) {
    BenchmarkReport r;
    r.task = task;
    r.seed = seed;
    r.train_rows = t.split.train.size();
    r.test_rows = t.split.test.size();
    if (task == Task::location) r.classifiers.push_back(t.classification);
    else {
        r.regressors.push_back(t.regression);
        r.constant = t.constant;
    }
    return r;
}

ModelBundle new_bundle(const LoadedData& d, const Settings& s) {
    ModelBundle b = make_bundle();
    b.kmeans = d.kmeans;
    if (has_class_labels(d.table)) b.class_profiles = class_profiles(d.table);
    b.metadata.seed = s.seed;
    b.metadata.data_fingerprint = fingerprint(d.bytes);
    b.metadata.preset = s.preset;
    b.metadata.rows = d.table.row_count();
    return b;
}

void store_entry(ModelBundle& b, TaskEntry entry) {
    if (entry.task == Task::location) b.location = std::move(entry);
    else b.price = std::move(entry);
}

int cmd_ingest(const std::string& input, const std::string& output, const std::string& summary_path,
               std::ostream& out) {
    const RawTable raw = load_csv(input, concert_csv_schema());
    json missing = json::object();
    std::vector<std::string> covariates;
    for (const auto& c : schema::concert_columns()) {
        const auto col = raw.column_index(c);
        const auto n = std::count_if(raw.rows.begin(), raw.rows.end(), [&](const auto& row) { return !row[col]; });
        if (n) missing[c] = n;
        if (c != schema::kPrice && c != schema::kClass) covariates.push_back(c);
    }
    const RawTable clean = impute_columns(raw, covariates);
    std::size_t invalid = 0;
    json problems = json::array();
    for (std::size_t r = 0; r < clean.row_count(); ++r) {
        RawTable one{clean.columns, {clean.rows[r]}};
        if (!one.rows[0][clean.column_index(schema::kClass)]) one.rows[0][clean.column_index(schema::kClass)] = "0";
        const auto issues = validate(concert_from_row(one, 0));
        if (!issues.empty()) {
            ++invalid;
            if (problems.size() < 20) problems.push_back(json{{"row", r}, {"problems", issues}});
        }
    }
    save_csv(output, clean);
    json summary{{"input", input},
                 {"rows", raw.row_count()},
                 {"missing_before_imputation", std::move(missing)},
                 {"invalid_rows", invalid},
                 {"invalid_examples", std::move(problems)},
                 {"fingerprint", fingerprint(read_file(input))}};
    if (!summary_path.empty()) write_file(summary_path, summary.dump(2) + "\n");
    out << summary.dump() << '\n';
    return 0;
}

int cmd_cluster(const std::string& cities_path, const std::string& input, const std::string& output,
                const std::string& labeled_out, std::size_t k, std::size_t restarts, bool population,
                const Settings& s, std::ostream& out) {
    if (cities_path.empty() == input.empty())
        fail(ErrorCode::invalid_argument, "cluster-cities needs exactly one of --cities or --input");
    RawTable concerts;
    std::vector<CityFeatures> cities;
    if (!cities_path.empty()) {
        cities = cities_from_table(load_csv(cities_path, city_csv_schema()));
    } else {
        concerts = load_csv(input, concert_csv_schema());
        cities = cities_from_concerts(concerts);
    }
    KMeansConfig kc;
    kc.k = k;
    kc.restarts = restarts;
    kc.include_population = population;
    kc.seed = s.seed;
    kc.threads = s.threads;
    const KMeansModel model = kmeans_fit(cities, kc);
    json assignments = json::array();
    for (std::size_t i = 0; i < cities.size(); ++i)
        assignments.push_back(json{{"city", cities[i].name}, {"class", model.assignments[i]}});
    const Matrix raw = model.raw_centroids();
    json centroids = json::array();
    for (Eigen::Index r = 0; r < raw.rows(); ++r)
        centroids.push_back(std::vector<double>(raw.row(r).data(), raw.row(r).data() + raw.cols()));
    json result{{"k", model.k},
                {"seed", model.seed},
                {"feature_names", model.feature_names},
                {"inertia", model.inertia},
                {"iterations", model.iterations},
                {"centroids", std::move(centroids)},
                {"assignments", std::move(assignments)}};
    write_file(output, result.dump(2) + "\n");
    if (!labeled_out.empty()) {
        if (input.empty()) fail(ErrorCode::invalid_argument, "--labeled-out needs --input");
        save_csv(labeled_out, relabel_classes(concerts, model));
    }
    out << fmt::format("{{\"k\":{},\"inertia\":{}}}\n", model.k, format_number(model.inertia));
    return 0;
}

int cmd_train(const std::string& input, const std::string& cities, const std::string& bundle_path,
              const std::string& report_path, bool upper_bound, const Settings& s, std::ostream& out) {
    const LoadedData d = load_concerts(input, cities, s);
    ModelBundle bundle = new_bundle(d, s);
    std::vector<std::pair<Task, ModelFamily>> jobs;
    if (s.task == "both") {
        jobs = {{Task::location, model_family_from_string(s.model.empty() ? "forest" : s.model)},
                {Task::price, model_family_from_string(s.price_model)}};
    } else {
        const Task task = parse_task(s.task);
        jobs = {{task, family_for(s, task)}};
    }
    json reports = json::object();
    std::string tables;
    for (const auto& [task, family] : jobs) {
        const TaskData data = prepare_task(d.table, task);
        TrainOutcome t = train_task(data, task, family, s.hyper, pipeline_options(s), upper_bound);
        const BenchmarkReport r = report_for(t, task, s.seed);
        reports[task == Task::location ? "location" : "price"] = json::parse(report_json(r));
        if (!report_path.empty() && jobs.size() == 1) write_report(report_path, r);
        tables += report_table(r);
        store_entry(bundle, std::move(t.entry));
    }
    if (!report_path.empty() && jobs.size() > 1) {
        write_file(report_path, reports.dump(2) + "\n");
        write_file(fs::path(report_path).replace_extension(".txt"), tables);
    }
    if (!bundle_path.empty()) save_bundle(bundle_path, bundle);
    out << reports.dump() << '\n';
    return 0;
}

int cmd_tune(const std::string& input, const std::string& cities, const std::string& bundle_path,
             const std::string& report_path, const std::string& log_path, const Settings& s, std::ostream& out) {
    const Task task = parse_task(s.task);
    const ModelFamily family = family_for(s, task);
    const LoadedData d = load_concerts(input, cities, s);
    const TaskData data = prepare_task(d.table, task);
    const SearchPlan plan = search_plan(family, s.search);
    TuneOutcome t = tune_task(data, task, family, s.hyper, plan, pipeline_options(s));

    json best = json::object();
    for (const auto& [name, value] : t.search.best.params.values)
        std::visit([&, &name = name](const auto& v) { best[name] = v; }, value);
    json report{{"task", s.task},
                {"family", to_string(family)},
                {"method", plan.method == SearchMethod::grid ? "grid" : "random"},
                {"trials", t.search.trials.size()},
                {"failed_trials",
                 std::count_if(t.search.trials.begin(), t.search.trials.end(), [](const auto& x) { return !x.ok; })},
                {"best_trial", t.search.best.index},
                {"best_params", std::move(best)},
                {"best_validation_score", t.search.best.score},
                {"final", json::parse(report_json(report_for(t.final, task, s.seed)))}};
    if (!report_path.empty()) write_file(report_path, report.dump(2) + "\n");
    if (!log_path.empty()) write_file(log_path, trial_log_csv(t.search));
    if (!bundle_path.empty()) {
        ModelBundle bundle = new_bundle(d, s);
        bundle.metadata.preset = s.preset == "default" ? "tuned" : s.preset;
        store_entry(bundle, std::move(t.final.entry));
        save_bundle(bundle_path, bundle);
    }
    out << report.dump() << '\n';
    return 0;
}

int cmd_benchmark(const std::string& input, const std::string& cities, const std::string& models,
                  const std::string& report_path, const std::string& out_dir, bool upper_bound, const Settings& s,
                  std::ostream& out) {
    const Task task = parse_task(s.task);
    std::vector<ModelFamily> families;
    if (models.empty()) {
        families = task == Task::location
                       ? std::vector<ModelFamily>{ModelFamily::logistic, ModelFamily::svc, ModelFamily::forest,
                                                  ModelFamily::mlp}
                       : std::vector<ModelFamily>{ModelFamily::sgd, ModelFamily::svr};
    } else {
        for (const auto& m : split_list(models)) families.push_back(model_family_from_string(m));
    }
    const LoadedData d = load_concerts(input, cities, s);
    const TaskData data = prepare_task(d.table, task);
    BenchmarkReport report;
    report.task = task;
    report.seed = s.seed;
    for (auto family : families) {
        const TrainOutcome t = train_task(data, task, family, s.hyper, pipeline_options(s), upper_bound);
        report.train_rows = t.split.train.size();
        report.test_rows = t.split.test.size();
        if (task == Task::location) {
            report.classifiers.push_back(t.classification);
            if (!out_dir.empty()) {
                const auto stem = fs::path(out_dir) / fmt::format("confusion_{}", to_string(family));
                write_file(stem.string() + ".csv", confusion_csv(t.classification.test_confusion, false));
                write_file(stem.string() + "_normalized.csv", confusion_csv(t.classification.test_confusion, true));
            }
        } else {
            report.regressors.push_back(t.regression);
            report.constant = t.constant;
        }
    }
    if (task == Task::price && !report.constant) {
        const auto split = split_indices(data.rows(), {s.test_fraction, s.seed});
        report.constant = constant_scores(data, split);
        report.train_rows = split.train.size();
        report.test_rows = split.test.size();
    }
    write_report(report_path, report);
    if (!out_dir.empty()) {
        write_file(fs::path(out_dir) / "report.json", report_json(report));
        write_file(fs::path(out_dir) / "report.txt", report_table(report));
    }
    out << report_table(report);
    return 0;
}

FeatureMatrix rows_for(const TaskEntry& entry, const RawTable& table) {
    FeatureMatrix x;
    x.column_names = entry.feature_columns;
    x.column_kinds = entry.feature_kinds;
    x.values.resize(static_cast<Eigen::Index>(table.row_count()), static_cast<Eigen::Index>(entry.feature_columns.size()));
    for (std::size_t c = 0; c < entry.feature_columns.size(); ++c) {
        const auto& name = entry.feature_columns[c];
        const auto col = table.find_column(name);
        const double fallback = entry.defaults.at(name);
        for (std::size_t r = 0; r < table.row_count(); ++r) {
            std::optional<double> v;
            if (col && table.rows[r][*col]) {
                v = parse_number(*table.rows[r][*col]);
                if (!v) fail(ErrorCode::invalid_argument, fmt::format("row {} column {} is not a number", r, name));
            }
            x.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v.value_or(fallback);
        }
    }
    return x;
}

int cmd_predict(const std::string& bundle_path, const std::string& input, const std::string& task_name,
                const std::string& output, std::ostream& out) {
    const ModelBundle bundle = load_bundle(bundle_path);
    const Task task = parse_task(task_name);
    const TaskEntry& entry = bundle.entry(task);
    CsvSchema lenient;
    lenient.numeric = schema::concert_columns();
    const RawTable table = load_csv(input, lenient);
    for (const auto& c : table.columns)
        if (!schema::is_known(c) && c != "city")
            fail(ErrorCode::schema_mismatch, fmt::format("unknown input column: {}", c));
    const FeatureMatrix x = rows_for(entry, table);
    std::string text;
    if (task == Task::location) {
        const Matrix p = predict_proba(entry, x);
        const Labels cls = argmax_rows(p);
        text = "p0,p1,p2,p3,p4,class\n";
        for (Eigen::Index r = 0; r < p.rows(); ++r) {
            for (Eigen::Index k = 0; k < p.cols(); ++k) text += format_number(p(r, k)) + ",";
            text += fmt::format("{}\n", cls[static_cast<std::size_t>(r)]);
        }
    } else {
        const Vector price = predict_price(entry, x);
        text = "price\n";
        for (Eigen::Index r = 0; r < price.size(); ++r) text += format_number(price(r)) + "\n";
    }
    if (output.empty()) out << text;
    else write_file(output, text);
    return 0;
}

int cmd_evaluate(const std::string& bundle_path, const std::string& input, const std::string& task_name,
                 const std::string& report_path, const std::string& out_dir, std::ostream& out) {
    const ModelBundle bundle = load_bundle(bundle_path);
    const Task task = parse_task(task_name);
    const TaskEntry& entry = bundle.entry(task);
    RawTable table = load_csv(input, concert_csv_schema());
    if (task == Task::location && !has_class_labels(table)) {
        if (!bundle.kmeans) fail(ErrorCode::missing_value, "input has no Class labels and the bundle has no city model");
        table = relabel_classes(table, *bundle.kmeans);
    }
    const TaskData data = prepare_task(table, task);
    json report{{"task", task_name}, {"family", to_string(entry.family)}, {"rows", data.rows()}};
    if (task == Task::location) {
        const Labels predicted = predict_labels(entry, data.x);
        const ConfusionMatrix cm = confusion(data.labels, predicted);
        report["accuracy"] = accuracy(data.labels, predicted);
        report["confusion"] = cm.counts;
        report["confusion_normalized"] = cm.normalized;
        if (!out_dir.empty()) {
            write_file(fs::path(out_dir) / "confusion.csv", confusion_csv(cm, false));
            write_file(fs::path(out_dir) / "confusion_normalized.csv", confusion_csv(cm, true));
        }
    } else {
        const Vector price = predict_price(entry, data.x);
        const Vector log_price = data.price.array().log();
        report["rmspe"] = rmspe(log_price, price.array().log().matrix());
        report["rmspe_price"] = rmspe(data.price, price);
    }
    if (!report_path.empty()) write_file(report_path, report.dump(2) + "\n");
    out << report.dump() << '\n';
    return 0;
}

int cmd_serve(const std::string& bundle_path, const std::string& host, int port, bool port_given, bool watch,
              std::ostream& out) {
    if (!port_given)
        if (const char* env = std::getenv("CONCERT_PORT")) {
            const auto p = parse_number(env);
            if (!p || *p < 0 || *p > 65535 || *p != std::floor(*p))
                fail(ErrorCode::invalid_argument, fmt::format("CONCERT_PORT '{}' is not a port number", env));
            port = static_cast<int>(*p);
        }
    Service service{fs::path(bundle_path)};
    const int bound = service.bind(host, port);
    if (watch) service.watch();
    out << fmt::format("{{\"listening\":\"{}:{}\"}}", host, bound) << std::endl;
    service.run();
    return 0;
}

int cmd_generate(const SyntheticSpec& spec, const std::string& output, const std::string& cities_out,
                 std::ostream& out) {
    const SyntheticData d = generate_synthetic(spec);
    save_csv(output, d.concerts);
    if (!cities_out.empty()) save_csv(cities_out, d.cities);
    out << fmt::format("{{\"rows\":{},\"cities\":{}}}\n", d.concerts.row_count(), d.cities.row_count());
    return 0;
}

void print_error(std::ostream& err, std::string_view code, std::string_view message) {
    err << json{{"error", code}, {"message", message}}.dump() << '\n';
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Concert location and price models"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    std::string config, input, cities, bundle_path, report_path, output, log_path, out_dir, models, task, model,
        price_model, host = "127.0.0.1", search_method, summary_path, labeled_out;
    std::uint64_t seed = 0;
    double test_fraction = 0.2;
    unsigned threads = 0;
    std::size_t trials = 0, k = 5, restarts = 10;
    int port = 8080;
    bool upper_bound = false, no_upper_bound = false, watch = false, no_oversample = false, population = false;
    SyntheticSpec synth;

    const auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config, "JSON config file; flags override its values");
        cmd->add_option("--seed", seed, "random seed");
        cmd->add_option("--threads", threads, "worker threads (0 = all cores)");
    };
    const auto add_model = [&](CLI::App* cmd) {
        cmd->add_option("--input", input, "concert CSV")->required();
        cmd->add_option("--cities", cities, "city CSV used to derive classes");
        cmd->add_option("--task", task, "location, price (or both for train)");
        cmd->add_option("--model", model, "model family: logistic, svc, forest, mlp, sgd, svr");
        cmd->add_option("--test-fraction", test_fraction, "held-out fraction");
        cmd->add_flag("--no-oversample", no_oversample, "keep the training class balance");
    };

    auto* ingest = app.add_subcommand("ingest", "validate and impute a raw concert CSV");
    ingest->add_option("--input", input, "raw concert CSV")->required();
    ingest->add_option("--out", output, "cleaned CSV")->required();
    ingest->add_option("--summary", summary_path, "summary JSON");

    auto* cluster = app.add_subcommand("cluster-cities", "k-means city classes");
    add_common(cluster);
    cluster->add_option("--cities", cities, "city CSV (city,income_per_capita,population_density[,population])");
    cluster->add_option("--input", input, "concert CSV to take cities from");
    cluster->add_option("--out", output, "clustering JSON")->required();
    cluster->add_option("--labeled-out", labeled_out, "concert CSV with recomputed Class");
    cluster->add_option("--k", k, "number of classes");
    cluster->add_option("--restarts", restarts, "k-means restarts");
    cluster->add_flag("--population", population, "also cluster on population");

    auto* train = app.add_subcommand("train", "fit a model and write a bundle");
    add_common(train);
    add_model(train);
    train->add_option("--price-model", price_model, "price model family when --task both");
    train->add_option("--out", bundle_path, "bundle file");
    train->add_option("--report", report_path, "report JSON (a .txt table is written alongside)");
    train->add_flag("--upper-bound", upper_bound, "also fit the memorization upper bound");

    auto* tune = app.add_subcommand("tune", "hyperparameter search");
    add_common(tune);
    add_model(tune);
    tune->add_option("--search", search_method, "grid or random");
    tune->add_option("--trials", trials, "random search budget");
    tune->add_option("--log", log_path, "trial log CSV");
    tune->add_option("--report", report_path, "report JSON");
    tune->add_option("--out", bundle_path, "bundle of the refitted best model");

    auto* evaluate = app.add_subcommand("evaluate", "score a bundle on labeled data");
    evaluate->add_option("--bundle", bundle_path, "bundle file")->required();
    evaluate->add_option("--input", input, "labeled concert CSV")->required();
    evaluate->add_option("--task", task, "location or price")->required();
    evaluate->add_option("--report", report_path, "report JSON");
    evaluate->add_option("--out-dir", out_dir, "directory for confusion CSVs");

    auto* benchmark = app.add_subcommand("benchmark", "models against the constant / random-guess baselines");
    add_common(benchmark);
    add_model(benchmark);
    benchmark->add_option("--models", models, "comma-separated families (default: all for the task)");
    benchmark->add_option("--report", report_path, "report JSON (a .txt table is written alongside)");
    benchmark->add_option("--out-dir", out_dir, "directory for report and confusion CSVs");
    benchmark->add_flag("--no-upper-bound", no_upper_bound, "skip the memorization runs");

    auto* predict = app.add_subcommand("predict", "predict rows of a CSV");
    predict->add_option("--bundle", bundle_path, "bundle file")->required();
    predict->add_option("--input", input, "CSV with feature columns; missing ones take defaults")->required();
    predict->add_option("--task", task, "location or price")->required();
    predict->add_option("--output", output, "output CSV (default stdout)");

    auto* serve = app.add_subcommand("serve", "HTTP inference service");
    serve->add_option("--bundle", bundle_path, "bundle file")->required();
    serve->add_option("--host", host, "bind address");
    auto* port_opt = serve->add_option("--port", port, "port (default 8080 or $CONCERT_PORT)");
    serve->add_flag("--watch", watch, "reload the bundle when the file changes");

    auto* generate = app.add_subcommand("generate-synthetic", "write a seeded synthetic concert dataset");
    generate->add_option("--rows", synth.rows, "row count");
    generate->add_option("--noise", synth.label_noise, "label flip probability");
    generate->add_option("--price-signal", synth.price_signal, "strength of genre/day price effects");
    generate->add_option("--seed", synth.seed, "random seed");
    generate->add_option("--out", output, "concert CSV")->required();
    generate->add_option("--cities-out", cities, "city CSV");

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        print_error(err, "usage", e.what());
        return 2;
    }

    try {
        auto* cmd = app.get_subcommands().front();
        Settings s = cmd->get_option_no_throw("--config") ? load_settings(config) : Settings{};
        const auto given = [&](const char* name) {
            const auto* opt = cmd->get_option_no_throw(name);
            return opt && opt->count() > 0;
        };
        if (given("--seed")) s.seed = seed;
        if (given("--threads")) s.threads = threads;
        if (given("--task")) s.task = task;
        if (given("--model")) s.model = model;
        if (given("--price-model")) s.price_model = price_model;
        if (given("--test-fraction")) s.test_fraction = test_fraction;
        if (no_oversample) s.oversample = false;
        if (given("--search")) s.search["method"] = search_method;
        if (given("--trials")) s.search["trials"] = trials;
        if (cmd == tune && s.task == "both") fail(ErrorCode::invalid_argument, "tune needs --task location or price");

        if (cmd == ingest) return cmd_ingest(input, output, summary_path, out);
        if (cmd == cluster) return cmd_cluster(cities, input, output, labeled_out, k, restarts, population, s, out);
        if (cmd == train) return cmd_train(input, cities, bundle_path, report_path, upper_bound, s, out);
        if (cmd == tune) return cmd_tune(input, cities, bundle_path, report_path, log_path, s, out);
        if (cmd == benchmark)
            return cmd_benchmark(input, cities, models, report_path, out_dir, !no_upper_bound, s, out);
        if (cmd == evaluate) return cmd_evaluate(bundle_path, input, task, report_path, out_dir, out);
        if (cmd == predict) return cmd_predict(bundle_path, input, task, output, out);
        if (cmd == serve) return cmd_serve(bundle_path, host, port, port_opt->count() > 0, watch, out);
        if (cmd == generate) return cmd_generate(synth, output, cities, out);
    } catch (const Error& e) {
        print_error(err, to_string(e.code()), e.what());
        return 1;
    } catch (const std::exception& e) {
        print_error(err, "internal", e.what());
        return 1;
    }
    return 1;
}

}  // namespace concert
