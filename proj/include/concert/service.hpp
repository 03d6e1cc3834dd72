#pragma once

#include "concert/bundle.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace httplib {
class Server;
}

namespace concert {

struct FieldError {
    std::string field;
    std::string message;
};

/// Raw feature row for `entry` from a JSON request body. Omitted features
/// take the entry's training defaults. Problems are appended to `errors`.
FeatureMatrix request_row(const TaskEntry& entry, std::string_view body, std::vector<FieldError>& errors);

struct HttpResponse {
    int status = 200;
    std::string body;
};

HttpResponse handle_health(const ModelBundle& bundle);
HttpResponse handle_model_card(const ModelBundle& bundle);
/// 400 with field messages for invalid bodies, 500 for model failures.
HttpResponse handle_predict(const ModelBundle& bundle, Task task, std::string_view body);

/// HTTP front end over an immutable bundle snapshot.
class Service {
public:
    explicit Service(std::filesystem::path bundle_path);
    explicit Service(ModelBundle bundle);
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds and returns the port; port 0 picks a free one. Throws io when busy.
    int bind(const std::string& host, int port);
    /// Serves on a background thread until stop().
    void start();
    /// Serves on the calling thread until stop().
    void run();
    void stop();

    /// Polls the bundle file and swaps in a new snapshot when it changes.
    void watch(std::chrono::milliseconds interval = std::chrono::milliseconds(500));
    /// Reloads now if the file changed. A bundle that fails to load is ignored.
    bool reload_if_changed();

    std::shared_ptr<const ModelBundle> snapshot() const;

private:
    void install_routes();

    std::filesystem::path path_;
    std::filesystem::file_time_type loaded_mtime_{};
    mutable std::mutex mutex_;
    std::shared_ptr<const ModelBundle> bundle_;
    std::unique_ptr<httplib::Server> server_;
    std::thread server_thread_;
    std::thread watch_thread_;
    std::atomic<bool> watching_{false};
};

}  // namespace concert
