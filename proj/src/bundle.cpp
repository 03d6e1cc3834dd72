#include "concert/bundle.hpp"

#include "concert/error.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <fstream>
#include <sstream>

namespace concert {

using json = nlohmann::ordered_json;

namespace {

std::string_view task_name(Task task) { return task == Task::location ? "location" : "price"; }

Task task_from_string(std::string_view text) {
    if (text == "location") return Task::location;
    if (text == "price") return Task::price;
    fail(ErrorCode::invalid_argument, fmt::format("unknown task '{}' (expected location or price)", text));
}

json to_json(const Matrix& m) {
    return json{{"rows", m.rows()}, {"cols", m.cols()},
                {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

Matrix matrix_from(const json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols)
        fail(ErrorCode::bundle, fmt::format("matrix of {}x{} has {} values", rows, cols, data.size()));
    Matrix m(rows, cols);
    std::copy(data.begin(), data.end(), m.data());
    return m;
}

json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from(const json& j) {
    const auto data = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(data.data(), static_cast<Eigen::Index>(data.size()));
}

template <typename T>
json optional_json(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> optional_from(const json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<T>();
}

json to_json(const SmoSettings& s) { return json{{"tolerance", s.tolerance}, {"max_passes", s.max_passes}}; }

SmoSettings smo_from(const json& j) {
    SmoSettings s;
    s.tolerance = j.at("tolerance").get<double>();
    s.max_passes = j.at("max_passes").get<std::size_t>();
    return s;
}

json to_json(const PcaState& p) {
    return json{{"components", to_json(p.components)},
                {"means", to_json(p.means)},
                {"explained_variance", to_json(p.explained_variance)},
                {"input_columns", p.input_columns}};
}

PcaState pca_from(const json& j) {
    PcaState p;
    p.components = matrix_from(j.at("components"));
    p.means = vector_from(j.at("means"));
    p.explained_variance = vector_from(j.at("explained_variance"));
    p.input_columns = j.at("input_columns").get<std::vector<std::string>>();
    return p;
}

json model_json(const SgdRegressor& m) {
    const auto& c = m.config;
    return json{{"config",
                 {{"penalty", to_string(c.penalty)},
                  {"alpha", c.alpha},
                  {"degree", c.degree},
                  {"eta0", c.eta0},
                  {"epochs", c.epochs},
                  {"batch_size", c.batch_size},
                  {"seed", c.seed}}},
                {"weights", to_json(m.weights)},
                {"intercept", m.intercept},
                {"input_columns", m.input_columns},
                {"expanded_columns", m.expanded_columns},
                {"train_rmspe", m.train_rmspe}};
}

SgdRegressor sgd_from(const json& j) {
    SgdRegressor m;
    const auto& c = j.at("config");
    m.config.penalty = penalty_from_string(c.at("penalty").get<std::string>());
    m.config.alpha = c.at("alpha").get<double>();
    m.config.degree = c.at("degree").get<int>();
    m.config.eta0 = c.at("eta0").get<double>();
    m.config.epochs = c.at("epochs").get<std::size_t>();
    m.config.batch_size = c.at("batch_size").get<std::size_t>();
    m.config.seed = c.at("seed").get<std::uint64_t>();
    m.weights = vector_from(j.at("weights"));
    m.intercept = j.at("intercept").get<double>();
    m.input_columns = j.at("input_columns").get<std::vector<std::string>>();
    m.expanded_columns = j.at("expanded_columns").get<std::vector<std::string>>();
    m.train_rmspe = j.at("train_rmspe").get<double>();
    return m;
}

json model_json(const SvrModel& m) {
    const auto& c = m.config;
    return json{{"config", {{"C", c.C}, {"gamma", c.gamma}, {"epsilon", c.epsilon}, {"smo", to_json(c.smo)}}},
                {"support_vectors", to_json(m.support_vectors)},
                {"coefficients", to_json(m.coefficients)},
                {"intercept", m.intercept},
                {"input_columns", m.input_columns},
                {"dual_objective", m.dual_objective},
                {"iterations", m.iterations}};
}

SvrModel svr_from(const json& j) {
    SvrModel m;
    const auto& c = j.at("config");
    m.config.C = c.at("C").get<double>();
    m.config.gamma = c.at("gamma").get<double>();
    m.config.epsilon = c.at("epsilon").get<double>();
    m.config.smo = smo_from(c.at("smo"));
    m.support_vectors = matrix_from(j.at("support_vectors"));
    m.coefficients = vector_from(j.at("coefficients"));
    m.intercept = j.at("intercept").get<double>();
    m.input_columns = j.at("input_columns").get<std::vector<std::string>>();
    m.dual_objective = j.at("dual_objective").get<double>();
    m.iterations = j.at("iterations").get<std::size_t>();
    return m;
}

json model_json(const LogisticModel& m) {
    const auto& c = m.config;
    return json{{"config",
                 {{"C", c.C},
                  {"penalty", to_string(c.penalty)},
                  {"mode", to_string(c.mode)},
                  {"pca_components", optional_json(c.pca_components)},
                  {"learning_rate", c.learning_rate},
                  {"epochs", c.epochs},
                  {"batch_size", c.batch_size},
                  {"seed", c.seed}}},
                {"weights", to_json(m.weights)},
                {"bias", to_json(m.bias)},
                {"pca", m.pca ? to_json(*m.pca) : json(nullptr)},
                {"input_columns", m.input_columns}};
}

LogisticModel logistic_from(const json& j) {
    LogisticModel m;
    const auto& c = j.at("config");
    m.config.C = c.at("C").get<double>();
    m.config.penalty = penalty_from_string(c.at("penalty").get<std::string>());
    m.config.mode = logistic_mode_from_string(c.at("mode").get<std::string>());
    m.config.pca_components = optional_from<std::size_t>(c.at("pca_components"));
    m.config.learning_rate = c.at("learning_rate").get<double>();
    m.config.epochs = c.at("epochs").get<std::size_t>();
    m.config.batch_size = c.at("batch_size").get<std::size_t>();
    m.config.seed = c.at("seed").get<std::uint64_t>();
    m.weights = matrix_from(j.at("weights"));
    m.bias = vector_from(j.at("bias"));
    if (!j.at("pca").is_null()) m.pca = pca_from(j.at("pca"));
    m.input_columns = j.at("input_columns").get<std::vector<std::string>>();
    return m;
}

json model_json(const SvcModel& m) {
    json machines = json::array();
    for (const auto& b : m.machines)
        machines.push_back(json{{"trained", b.trained},
                                {"support_vectors", to_json(b.support_vectors)},
                                {"coefficients", to_json(b.coefficients)},
                                {"intercept", b.intercept}});
    return json{{"config", {{"C", m.config.C}, {"gamma", m.config.gamma}, {"smo", to_json(m.config.smo)}}},
                {"machines", std::move(machines)},
                {"input_columns", m.input_columns}};
}

SvcModel svc_from(const json& j) {
    SvcModel m;
    const auto& c = j.at("config");
    m.config.C = c.at("C").get<double>();
    m.config.gamma = c.at("gamma").get<double>();
    m.config.smo = smo_from(c.at("smo"));
    const auto& machines = j.at("machines");
    if (machines.size() != m.machines.size()) fail(ErrorCode::bundle, "SVC bundle needs five machines");
    for (std::size_t k = 0; k < m.machines.size(); ++k) {
        auto& b = m.machines[k];
        b.trained = machines[k].at("trained").get<bool>();
        b.support_vectors = matrix_from(machines[k].at("support_vectors"));
        b.coefficients = vector_from(machines[k].at("coefficients"));
        b.intercept = machines[k].at("intercept").get<double>();
    }
    m.input_columns = j.at("input_columns").get<std::vector<std::string>>();
    return m;
}

json model_json(const RandomForest& f) {
    const auto& c = f.config;
    json trees = json::array();
    for (const auto& t : f.trees) {
        json nodes = json::array();
        for (const auto& n : t.nodes) {
            json node = json::array({n.feature, n.threshold, n.left, n.right});
            for (double count : n.counts) node.push_back(count);
            nodes.push_back(std::move(node));
        }
        trees.push_back(std::move(nodes));
    }
    return json{{"config",
                 {{"n_trees", c.n_trees},
                  {"max_depth", optional_json(c.max_depth)},
                  {"min_samples_leaf", c.min_samples_leaf},
                  {"features_per_split", optional_json(c.features_per_split)},
                  {"bootstrap", c.bootstrap},
                  {"seed", c.seed}}},
                {"features_per_split", f.features_per_split},
                {"input_columns", f.input_columns},
                {"trees", std::move(trees)}};
}

RandomForest forest_from(const json& j) {
    RandomForest f;
    const auto& c = j.at("config");
    f.config.n_trees = c.at("n_trees").get<std::size_t>();
    f.config.max_depth = optional_from<std::size_t>(c.at("max_depth"));
    f.config.min_samples_leaf = c.at("min_samples_leaf").get<std::size_t>();
    f.config.features_per_split = optional_from<std::size_t>(c.at("features_per_split"));
    f.config.bootstrap = c.at("bootstrap").get<bool>();
    f.config.seed = c.at("seed").get<std::uint64_t>();
    f.features_per_split = j.at("features_per_split").get<std::size_t>();
    f.input_columns = j.at("input_columns").get<std::vector<std::string>>();
    for (const auto& nodes : j.at("trees")) {
        DecisionTree t;
        for (const auto& n : nodes) {
            if (n.size() != 4 + kNumClasses) fail(ErrorCode::bundle, "malformed tree node");
            DecisionTree::Node node;
            node.feature = n[0].get<int>();
            node.threshold = n[1].get<double>();
            node.left = n[2].get<int>();
            node.right = n[3].get<int>();
            for (std::size_t k = 0; k < node.counts.size(); ++k) node.counts[k] = n[4 + k].get<double>();
            t.nodes.push_back(node);
        }
        const auto size = static_cast<int>(t.nodes.size());
        if (t.nodes.empty()) fail(ErrorCode::bundle, "empty tree");
        for (const auto& node : t.nodes)
            if (node.feature >= 0 && (node.left <= 0 || node.left >= size || node.right <= 0 || node.right >= size ||
                                      node.feature >= static_cast<int>(f.input_columns.size())))
                fail(ErrorCode::bundle, "tree node points outside the tree");
        f.trees.push_back(std::move(t));
    }
    return f;
}

json model_json(const MlpModel& m) {
    const auto& c = m.config;
    json weights = json::array(), biases = json::array();
    for (const auto& w : m.weights) weights.push_back(to_json(w));
    for (const auto& b : m.biases) biases.push_back(to_json(b));
    return json{{"config",
                 {{"hidden", c.hidden},
                  {"dropout", c.dropout},
                  {"epochs", c.epochs},
                  {"batch_size", c.batch_size},
                  {"learning_rate", c.learning_rate},
                  {"seed", c.seed},
                  {"patience", optional_json(c.patience)}}},
                {"layer_sizes", m.layer_sizes},
                {"weights", std::move(weights)},
                {"biases", std::move(biases)},
                {"input_columns", m.input_columns},
                {"best_epoch", m.best_epoch}};
}

MlpModel mlp_from(const json& j) {
    MlpModel m;
    const auto& c = j.at("config");
    m.config.hidden = c.at("hidden").get<std::vector<std::size_t>>();
    m.config.dropout = c.at("dropout").get<std::vector<double>>();
    m.config.epochs = c.at("epochs").get<std::size_t>();
    m.config.batch_size = c.at("batch_size").get<std::size_t>();
    m.config.learning_rate = c.at("learning_rate").get<double>();
    m.config.seed = c.at("seed").get<std::uint64_t>();
    m.config.patience = optional_from<std::size_t>(c.at("patience"));
    m.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
    for (const auto& w : j.at("weights")) m.weights.push_back(matrix_from(w));
    for (const auto& b : j.at("biases")) m.biases.push_back(vector_from(b));
    if (m.weights.size() + 1 != m.layer_sizes.size() || m.biases.size() != m.weights.size())
        fail(ErrorCode::bundle, "MLP layer sizes do not match its weights");
    for (std::size_t l = 0; l < m.weights.size(); ++l)
        if (static_cast<std::size_t>(m.weights[l].rows()) != m.layer_sizes[l + 1] ||
            static_cast<std::size_t>(m.weights[l].cols()) != m.layer_sizes[l] ||
            static_cast<std::size_t>(m.biases[l].size()) != m.layer_sizes[l + 1])
            fail(ErrorCode::bundle, fmt::format("MLP layer {} has the wrong shape", l + 1));
    m.input_columns = j.at("input_columns").get<std::vector<std::string>>();
    m.best_epoch = j.at("best_epoch").get<std::size_t>();
    return m;
}

json to_json(const KMeansModel& k) {
    return json{{"k", k.k},
                {"centroids", to_json(k.centroids)},
                {"feature_mean", to_json(k.feature_mean)},
                {"feature_stddev", to_json(k.feature_stddev)},
                {"inertia", k.inertia},
                {"seed", k.seed},
                {"restarts", k.restarts},
                {"include_population", k.include_population},
                {"feature_names", k.feature_names}};
}

KMeansModel kmeans_from(const json& j) {
    KMeansModel k;
    k.k = j.at("k").get<std::size_t>();
    k.centroids = matrix_from(j.at("centroids"));
    k.feature_mean = vector_from(j.at("feature_mean"));
    k.feature_stddev = vector_from(j.at("feature_stddev"));
    k.inertia = j.at("inertia").get<double>();
    k.seed = j.at("seed").get<std::uint64_t>();
    k.restarts = j.at("restarts").get<std::size_t>();
    k.include_population = j.at("include_population").get<bool>();
    k.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    if (static_cast<std::size_t>(k.centroids.rows()) != k.k ||
        k.centroids.cols() != k.feature_mean.size() || k.feature_mean.size() != k.feature_stddev.size())
        fail(ErrorCode::bundle, "k-means centroids do not match their feature statistics");
    return k;
}

json entry_json(const TaskEntry& e) {
    json log_spec = json::array();
    for (const auto& c : e.log_spec.columns) log_spec.push_back(json{{"name", c.name}, {"offset", c.offset}});
    std::vector<std::string> kinds;
    for (auto k : e.feature_kinds) kinds.emplace_back(to_string(k));
    json defaults = json::object();
    for (const auto& [name, value] : e.defaults) defaults[name] = value;
    json scores = json::object();
    for (const auto& [name, value] : e.scores) scores[name] = value;
    json model = std::visit([](const auto& m) { return model_json(m); }, e.model);
    return json{{"task", task_name(e.task)},
                {"family", to_string(e.family)},
                {"feature_columns", e.feature_columns},
                {"feature_kinds", kinds},
                {"defaults", std::move(defaults)},
                {"log_spec", std::move(log_spec)},
                {"scaler", {{"columns", e.scaler.column_names}, {"min", e.scaler.min}, {"max", e.scaler.max}}},
                {"target_log", e.target_log},
                {"model", std::move(model)},
                {"scores", std::move(scores)}};
}

TaskEntry entry_from(const json& j) {
    TaskEntry e;
    e.task = task_from_string(j.at("task").get<std::string>());
    e.family = model_family_from_string(j.at("family").get<std::string>());
    e.feature_columns = j.at("feature_columns").get<std::vector<std::string>>();
    for (const auto& k : j.at("feature_kinds")) e.feature_kinds.push_back(column_kind_from_string(k.get<std::string>()));
    if (e.feature_kinds.size() != e.feature_columns.size())
        fail(ErrorCode::bundle, "feature kinds and feature columns differ in length");
    for (const auto& [name, value] : j.at("defaults").items()) e.defaults[name] = value.get<double>();
    for (const auto& c : j.at("log_spec"))
        e.log_spec.columns.push_back({c.at("name").get<std::string>(), c.at("offset").get<double>()});
    const auto& s = j.at("scaler");
    e.scaler.column_names = s.at("columns").get<std::vector<std::string>>();
    e.scaler.min = s.at("min").get<std::vector<double>>();
    e.scaler.max = s.at("max").get<std::vector<double>>();
    if (e.scaler.min.size() != e.scaler.column_names.size() || e.scaler.max.size() != e.scaler.column_names.size())
        fail(ErrorCode::bundle, "scaler bounds do not match its columns");
    e.target_log = j.at("target_log").get<bool>();
    const auto& m = j.at("model");
    switch (e.family) {
        case ModelFamily::sgd: e.model = sgd_from(m); break;
        case ModelFamily::svr: e.model = svr_from(m); break;
        case ModelFamily::logistic: e.model = logistic_from(m); break;
        case ModelFamily::svc: e.model = svc_from(m); break;
        case ModelFamily::forest: e.model = forest_from(m); break;
        case ModelFamily::mlp: e.model = mlp_from(m); break;
    }
    for (const auto& [name, value] : j.at("scores").items()) e.scores[name] = value.get<double>();
    return e;
}

void check_columns(const ModelBundle& b, const TaskEntry& e) {
    const auto known = [&](const std::string& c) {
        return std::find(b.schema_columns.begin(), b.schema_columns.end(), c) != b.schema_columns.end();
    };
    for (const auto* list : {&e.feature_columns, &e.scaler.column_names})
        for (const auto& c : *list)
            if (!known(c)) fail(ErrorCode::bundle, fmt::format("column {} is not in the bundled schema", c));
    for (const auto& c : e.log_spec.columns)
        if (!known(c.name)) fail(ErrorCode::bundle, fmt::format("column {} is not in the bundled schema", c.name));
    for (const auto& [name, value] : e.defaults)
        if (!known(name)) fail(ErrorCode::bundle, fmt::format("column {} is not in the bundled schema", name));
}

}  // namespace

const TaskEntry& ModelBundle::entry(Task task) const {
    const auto& e = task == Task::location ? location : price;
    if (!e) fail(ErrorCode::bundle, fmt::format("bundle has no {} model", task_name(task)));
    return *e;
}

ModelBundle make_bundle() {
    ModelBundle b;
    b.schema_columns = schema::concert_columns();
    for (const auto& c : b.schema_columns) b.schema_kinds.push_back(schema::kind_of(c));
    return b;
}

std::string bundle_to_json(const ModelBundle& b) {
    json schema = json::array();
    for (std::size_t i = 0; i < b.schema_columns.size(); ++i)
        schema.push_back(json{{"name", b.schema_columns[i]}, {"kind", to_string(b.schema_kinds[i])}});
    json profiles = json::array();
    for (const auto& p : b.class_profiles)
        profiles.push_back(json{{"count", p.count}, {"income", p.income}, {"density", p.density}});
    json models = json::object();
    if (b.location) models["location"] = entry_json(*b.location);
    if (b.price) models["price"] = entry_json(*b.price);
    json j{{"format_version", b.format_version},
           {"schema", std::move(schema)},
           {"kmeans", b.kmeans ? to_json(*b.kmeans) : json(nullptr)},
           {"class_profiles", std::move(profiles)},
           {"models", std::move(models)},
           {"metadata",
            {{"seed", b.metadata.seed},
             {"data_fingerprint", b.metadata.data_fingerprint},
             {"preset", b.metadata.preset},
             {"rows", b.metadata.rows}}}};
    return j.dump(1) + "\n";
}

ModelBundle bundle_from_json(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        fail(ErrorCode::bundle, fmt::format("corrupt bundle: {}", e.what()));
    }
    try {
        ModelBundle b;
        b.format_version = j.at("format_version").get<int>();
        if (b.format_version != kBundleFormatVersion)
            fail(ErrorCode::bundle, fmt::format("unsupported bundle format version {} (expected {})", b.format_version,
                                                kBundleFormatVersion));
        for (const auto& c : j.at("schema")) {
            b.schema_columns.push_back(c.at("name").get<std::string>());
            b.schema_kinds.push_back(column_kind_from_string(c.at("kind").get<std::string>()));
        }
        if (!j.at("kmeans").is_null()) b.kmeans = kmeans_from(j.at("kmeans"));
        for (const auto& p : j.at("class_profiles"))
            b.class_profiles.push_back(
                {p.at("count").get<std::size_t>(), p.at("income").get<double>(), p.at("density").get<double>()});
        const auto& models = j.at("models");
        if (models.contains("location")) b.location = entry_from(models.at("location"));
        if (models.contains("price")) b.price = entry_from(models.at("price"));
        if (!b.location && !b.price) fail(ErrorCode::bundle, "bundle holds no model");
        if (b.location && b.location->task != Task::location) fail(ErrorCode::bundle, "location entry has another task");
        if (b.price && b.price->task != Task::price) fail(ErrorCode::bundle, "price entry has another task");
        for (const auto* e : {b.location ? &*b.location : nullptr, b.price ? &*b.price : nullptr})
            if (e) check_columns(b, *e);
        const auto& meta = j.at("metadata");
        b.metadata.seed = meta.at("seed").get<std::uint64_t>();
        b.metadata.data_fingerprint = meta.at("data_fingerprint").get<std::string>();
        b.metadata.preset = meta.at("preset").get<std::string>();
        b.metadata.rows = meta.at("rows").get<std::size_t>();
        return b;
    } catch (const json::exception& e) {
        fail(ErrorCode::bundle, fmt::format("corrupt bundle: {}", e.what()));
    } catch (const Error& e) {
        if (e.code() == ErrorCode::bundle) throw;
        fail(ErrorCode::bundle, fmt::format("corrupt bundle: {}", e.what()));
    }
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::io, fmt::format("cannot open {}", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io, fmt::format("cannot write {}", path.string()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) fail(ErrorCode::io, fmt::format("failed writing {}", path.string()));
}

void save_bundle(const std::filesystem::path& path, const ModelBundle& bundle) {
    write_file(path, bundle_to_json(bundle));
}

ModelBundle load_bundle(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) fail(ErrorCode::bundle, fmt::format("bundle {} does not exist", path.string()));
    return bundle_from_json(read_file(path));
}

std::string fingerprint(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return fmt::format("{:016x}", h);
}

Hyperparameters hyperparameters_of(const TaskEntry& entry) {
    Hyperparameters h;
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, SgdRegressor>) h.sgd = m.config;
            else if constexpr (std::is_same_v<T, SvrModel>) h.svr = m.config;
            else if constexpr (std::is_same_v<T, LogisticModel>) h.logistic = m.config;
            else if constexpr (std::is_same_v<T, SvcModel>) h.svc = m.config;
            else if constexpr (std::is_same_v<T, RandomForest>) h.forest = m.config;
            else h.mlp = m.config;
        },
        entry.model);
    return h;
}

std::string model_card_json(const ModelBundle& b) {
    json models = json::object();
    for (const auto* e : {b.location ? &*b.location : nullptr, b.price ? &*b.price : nullptr}) {
        if (!e) continue;
        json params = json::object();
        for (const auto& [name, value] : describe(hyperparameters_of(*e), e->family).values)
            std::visit([&, &name = name](const auto& v) { params[name] = v; }, value);
        json scores = json::object();
        for (const auto& [name, value] : e->scores) scores[name] = value;
        json defaults = json::object();
        for (const auto& [name, value] : e->defaults) defaults[name] = value;
        models[std::string(task_name(e->task))] = json{{"family", to_string(e->family)},
                                                       {"hyperparameters", std::move(params)},
                                                       {"scores", std::move(scores)},
                                                       {"feature_columns", e->feature_columns},
                                                       {"defaults", std::move(defaults)}};
    }
    json classes = json::array();
    for (std::size_t k = 0; k < b.class_profiles.size(); ++k) {
        const auto& p = b.class_profiles[k];
        json c{{"class", k}, {"concerts", p.count}, {"mean_income", p.income}, {"mean_density", p.density}};
        if (b.kmeans) {
            const Matrix raw = b.kmeans->raw_centroids();
            if (static_cast<Eigen::Index>(k) < raw.rows()) {
                c["centroid_income"] = raw(static_cast<Eigen::Index>(k), 0);
                c["centroid_density"] = raw(static_cast<Eigen::Index>(k), 1);
            }
        }
        classes.push_back(std::move(c));
    }
    json card{{"format_version", b.format_version},
              {"metadata",
               {{"seed", b.metadata.seed},
                {"data_fingerprint", b.metadata.data_fingerprint},
                {"preset", b.metadata.preset},
                {"rows", b.metadata.rows}}},
              {"models", std::move(models)},
              {"classes", std::move(classes)},
              {"genres", schema::genres()},
              {"days", schema::days()}};
    return card.dump(2);
}

}  // namespace concert
