#include "concert/service.hpp"

#include "concert/error.hpp"

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>

#include <cmath>
#include <iostream>

namespace concert {

using json = nlohmann::ordered_json;

namespace {

struct NumericField {
    std::string_view key;
    std::string_view column;
    double low;
    double high;
    bool low_open;
};

constexpr double kInf = std::numeric_limits<double>::infinity();

const std::vector<NumericField>& numeric_fields() {
    static const std::vector<NumericField> fields{
        {"concert_popularity", schema::kPopularity, 0.0, 1.0, false},
        {"playcount", schema::kPlaycount, 0.0, kInf, false},
        {"market_heat", schema::kMarketHeat, 0.0, kInf, false},
        {"venue_concert_count", schema::kVenueCount, 0.0, kInf, false},
        {"genres_num", schema::kGenresNum, 0.0, kInf, false},
        {"average_price", schema::kPrice, 0.0, kInf, true},
        {"latitude", schema::kLatitude, -90.0, 90.0, false},
        {"longitude", schema::kLongitude, -180.0, 180.0, false},
    };
    return fields;
}

const std::vector<NumericField>& city_fields() {
    static const std::vector<NumericField> fields{
        {"income_per_capita", schema::kIncome, 0.0, kInf, false},
        {"population_density", schema::kDensity, 0.0, kInf, false},
        {"population", schema::kPopulation, 0.0, kInf, false},
    };
    return fields;
}

void read_number(const json& value, const NumericField& f, const std::string& field, std::map<std::string, double>& out,
                 std::vector<FieldError>& errors) {
    if (!value.is_number()) {
        errors.push_back({field, "must be a number"});
        return;
    }
    const double v = value.get<double>();
    const bool below = f.low_open ? !(v > f.low) : !(v >= f.low);
    if (!std::isfinite(v) || below || v > f.high) {
        errors.push_back({field, f.high == kInf ? fmt::format("must be {} {}", f.low_open ? ">" : ">=", f.low)
                                                : fmt::format("must lie in [{}, {}]", f.low, f.high)});
        return;
    }
    out[std::string(f.column)] = v;
}

json error_body(const std::vector<FieldError>& errors) {
    json fields = json::array();
    for (const auto& e : errors) fields.push_back(json{{"field", e.field}, {"message", e.message}});
    return json{{"error", "invalid_request"}, {"fields", std::move(fields)}};
}

}  // namespace

FeatureMatrix request_row(const TaskEntry& entry, std::string_view body, std::vector<FieldError>& errors) {
    json j;
    try {
        j = json::parse(body.empty() ? std::string_view("{}") : body);
    } catch (const json::exception&) {
        errors.push_back({"body", "is not valid JSON"});
    }
    if (errors.empty() && !j.is_object()) errors.push_back({"body", "must be a JSON object"});

    std::map<std::string, double> values;
    if (errors.empty()) {
        for (const auto& [key, value] : j.items()) {
            if (key == "genres") {
                if (!value.is_array()) {
                    errors.push_back({"genres", "must be a list of genre names"});
                    continue;
                }
                for (const auto& g : schema::genres()) values[g] = 0.0;
                std::size_t n = 0;
                for (const auto& item : value) {
                    const auto& names = schema::genres();
                    const auto* name = item.is_string() ? item.get_ptr<const std::string*>() : nullptr;
                    if (!name || std::find(names.begin(), names.end(), *name) == names.end()) {
                        errors.push_back({"genres", fmt::format("unknown genre {}", item.dump())});
                        continue;
                    }
                    if (values[*name] == 0.0) ++n;
                    values[*name] = 1.0;
                }
                if (!j.contains("genres_num")) values[std::string(schema::kGenresNum)] = static_cast<double>(n);
            } else if (key == "day") {
                const auto& days = schema::days();
                const auto* name = value.is_string() ? value.get_ptr<const std::string*>() : nullptr;
                if (!name || std::find(days.begin(), days.end(), *name) == days.end()) {
                    errors.push_back({"day", fmt::format("must be one of {}", fmt::join(days, ", "))});
                    continue;
                }
                for (const auto& d : days) values[d] = d == *name ? 1.0 : 0.0;
            } else if (key == "venue_type") {
                if (!value.is_number_integer() || value.get<int>() < 1 || value.get<int>() > 3) {
                    errors.push_back({"venue_type", "must be 1, 2 or 3"});
                    continue;
                }
                values[std::string(schema::kVenueType)] = value.get<double>();
            } else if (key == "city") {
                if (!value.is_object()) {
                    errors.push_back({"city", "must be an object"});
                    continue;
                }
                for (const auto& [ck, cv] : value.items()) {
                    const auto& fields = city_fields();
                    auto it = std::find_if(fields.begin(), fields.end(), [&, &ck = ck](const auto& f) { return f.key == ck; });
                    if (it == fields.end()) errors.push_back({"city." + ck, "unknown field"});
                    else read_number(cv, *it, "city." + ck, values, errors);
                }
            } else {
                const auto& fields = numeric_fields();
                auto it = std::find_if(fields.begin(), fields.end(), [&, &key = key](const auto& f) { return f.key == key; });
                if (it == fields.end()) errors.push_back({key, "unknown field"});
                else read_number(value, *it, key, values, errors);
            }
        }
    }

    FeatureMatrix row;
    row.column_names = entry.feature_columns;
    row.column_kinds = entry.feature_kinds;
    row.values.resize(1, static_cast<Eigen::Index>(entry.feature_columns.size()));
    for (std::size_t c = 0; c < entry.feature_columns.size(); ++c) {
        const auto& name = entry.feature_columns[c];
        double v = 0.0;
        if (auto it = values.find(name); it != values.end()) v = it->second;
        else if (auto d = entry.defaults.find(name); d != entry.defaults.end()) v = d->second;
        else errors.push_back({name, "missing and has no default"});
        row.values(0, static_cast<Eigen::Index>(c)) = v;
    }
    return row;
}

HttpResponse handle_health(const ModelBundle& bundle) {
    json tasks = json::array();
    if (bundle.location) tasks.push_back("location");
    if (bundle.price) tasks.push_back("price");
    return {200, json{{"status", "ok"}, {"format_version", bundle.format_version}, {"tasks", std::move(tasks)}}.dump()};
}

HttpResponse handle_model_card(const ModelBundle& bundle) { return {200, model_card_json(bundle)}; }

HttpResponse handle_predict(const ModelBundle& bundle, Task task, std::string_view body) {
    try {
        const TaskEntry& entry = bundle.entry(task);
        std::vector<FieldError> errors;
        const FeatureMatrix row = request_row(entry, body, errors);
        if (!errors.empty()) return {400, error_body(errors).dump()};
        json out;
        out["task"] = task == Task::location ? "location" : "price";
        out["family"] = to_string(entry.family);
        if (task == Task::location) {
            const Matrix p = predict_proba(entry, row);
            std::vector<double> probs(p.data(), p.data() + p.cols());
            out["probabilities"] = probs;
            out["class"] = argmax_rows(p).front();
        } else {
            const double price = predict_price(entry, row)(0);
            out["price"] = price;
            if (auto it = entry.scores.find("train_rmspe"); it != entry.scores.end()) out["training_rmspe"] = it->second;
            if (auto it = entry.scores.find("test_rmspe"); it != entry.scores.end()) out["test_rmspe"] = it->second;
            out["note"] = "RMSPE is measured on log price";
        }
        return {200, out.dump()};
    } catch (const Error& e) {
        return {500, json{{"error", to_string(e.code())}, {"message", e.what()}}.dump()};
    } catch (const std::exception& e) {
        return {500, json{{"error", "internal"}, {"message", e.what()}}.dump()};
    }
}

Service::Service(std::filesystem::path bundle_path) : path_(std::move(bundle_path)) {
    bundle_ = std::make_shared<const ModelBundle>(load_bundle(path_));
    loaded_mtime_ = std::filesystem::last_write_time(path_);
    install_routes();
}

Service::Service(ModelBundle bundle) : bundle_(std::make_shared<const ModelBundle>(std::move(bundle))) {
    install_routes();
}

Service::~Service() { stop(); }

std::shared_ptr<const ModelBundle> Service::snapshot() const {
    std::lock_guard lock(mutex_);
    return bundle_;
}

void Service::install_routes() {
    server_ = std::make_unique<httplib::Server>();
    server_->set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
    });
    server_->set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                  {"Access-Control-Allow-Headers", "Content-Type"},
                                  {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    const auto reply = [](httplib::Response& res, const HttpResponse& r) {
        res.status = r.status;
        res.set_content(r.body, "application/json");
    };
    server_->Get("/health", [this, reply](const httplib::Request&, httplib::Response& res) {
        reply(res, handle_health(*snapshot()));
    });
    server_->Get("/model-card", [this, reply](const httplib::Request&, httplib::Response& res) {
        reply(res, handle_model_card(*snapshot()));
    });
    server_->Post("/predict/location", [this, reply](const httplib::Request& req, httplib::Response& res) {
        reply(res, handle_predict(*snapshot(), Task::location, req.body));
    });
    server_->Post("/predict/price", [this, reply](const httplib::Request& req, httplib::Response& res) {
        reply(res, handle_predict(*snapshot(), Task::price, req.body));
    });
    server_->Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
}

int Service::bind(const std::string& host, int port) {
    if (port == 0) {
        const int bound = server_->bind_to_any_port(host);
        if (bound < 0) fail(ErrorCode::io, fmt::format("cannot bind {}", host));
        return bound;
    }
    if (!server_->bind_to_port(host, port)) fail(ErrorCode::io, fmt::format("port {} on {} is busy", port, host));
    return port;
}

void Service::start() {
    server_thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
}

void Service::run() { server_->listen_after_bind(); }

void Service::stop() {
    watching_ = false;
    if (watch_thread_.joinable()) watch_thread_.join();
    if (server_) server_->stop();
    if (server_thread_.joinable()) server_thread_.join();
}

bool Service::reload_if_changed() {
    if (path_.empty()) return false;
    std::error_code ec;
    const auto mtime = std::filesystem::last_write_time(path_, ec);
    if (ec || mtime == loaded_mtime_) return false;
    try {
        auto fresh = std::make_shared<const ModelBundle>(load_bundle(path_));
        std::lock_guard lock(mutex_);
        bundle_ = std::move(fresh);
        loaded_mtime_ = mtime;
        return true;
    } catch (const std::exception& e) {
        std::cerr << "bundle reload skipped: " << e.what() << '\n';
        loaded_mtime_ = mtime;
        return false;
    }
}

void Service::watch(std::chrono::milliseconds interval) {
    if (path_.empty()) fail(ErrorCode::invalid_argument, "watching needs a bundle file");
    watching_ = true;
    watch_thread_ = std::thread([this, interval] {
        while (watching_) {
            std::this_thread::sleep_for(interval);
            reload_if_changed();
        }
    });
}

}  // namespace concert
