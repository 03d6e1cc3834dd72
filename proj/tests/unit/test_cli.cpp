#include <doctest.h>

#include "concert/bundle.hpp"
#include "concert/cli.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace concert;
using json = nlohmann::json;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run cli(std::vector<std::string> args) {
    args.insert(args.begin(), "concert");
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::filesystem::path workdir() {
    const auto dir = std::filesystem::temp_directory_path() / "concert_cli_unit";
    std::filesystem::create_directories(dir);
    return dir;
}

std::string path(const std::string& name) { return (workdir() / name).string(); }

void ensure_data() {
    static bool done = false;
    if (done) return;
    REQUIRE(cli({"generate-synthetic", "--rows", "300", "--seed", "2", "--out", path("data.csv"), "--cities-out",
                 path("cities.csv")})
                .code == 0);
    done = true;
}

}  // namespace

TEST_CASE("errors are single-line JSON") {
    const Run unknown = cli({"train", "--input", "nope.csv", "--model", "boosting"});
    CHECK(unknown.code != 0);
    CHECK(std::count(unknown.err.begin(), unknown.err.end(), '\n') == 1);
    const auto j = json::parse(unknown.err);
    CHECK(j.contains("error"));
    CHECK(j.contains("message"));

    const Run missing = cli({"predict", "--bundle", path("absent.json"), "--input", "x.csv", "--task", "location"});
    CHECK(missing.code == 1);
    CHECK(json::parse(missing.err)["error"] == "bundle");

    const Run usage = cli({"train"});
    CHECK(usage.code == 2);
    CHECK(json::parse(usage.err)["error"] == "usage");
}

TEST_CASE("unknown model family") {
    ensure_data();
    const Run r = cli({"train", "--input", path("data.csv"), "--task", "location", "--model", "boosting"});
    CHECK(r.code == 1);
    CHECK(json::parse(r.err)["message"].get<std::string>().find("boosting") != std::string::npos);
}

TEST_CASE("schema mismatch") {
    std::ofstream(path("bad.csv")) << "latitude,longitude\n1,2\n";
    const Run r = cli({"train", "--input", path("bad.csv")});
    CHECK(r.code == 1);
    CHECK(json::parse(r.err)["error"] == "schema_mismatch");
}

TEST_CASE("train then predict") {
    ensure_data();
    const Run train = cli({"train", "--input", path("data.csv"), "--task", "both", "--out", path("bundle.json"),
                           "--report", path("train.json"), "--threads", "1"});
    REQUIRE(train.code == 0);
    const auto report = json::parse(std::ifstream(path("train.json")));
    CHECK(report.dump().find("accuracy") != std::string::npos);
    CHECK(std::filesystem::exists(path("train.txt")));

    std::ofstream(path("one.csv")) << "concert_popularity,Sat\n0.9,1\n0.1,0\n";
    const Run predict = cli({"predict", "--bundle", path("bundle.json"), "--input", path("one.csv"), "--task", "location"});
    REQUIRE(predict.code == 0);
    std::istringstream lines(predict.out);
    std::string line;
    std::getline(lines, line);
    CHECK(line == "p0,p1,p2,p3,p4,class");
    int rows = 0;
    while (std::getline(lines, line)) {
        std::istringstream cells(line);
        std::string cell;
        double sum = 0;
        for (int k = 0; k < 5; ++k) {
            std::getline(cells, cell, ',');
            sum += std::stod(cell);
        }
        CHECK(std::abs(sum - 1.0) < 1e-9);
        ++rows;
    }
    CHECK(rows == 2);

    const Run price = cli({"predict", "--bundle", path("bundle.json"), "--input", path("one.csv"), "--task", "price"});
    CHECK(price.code == 0);
    CHECK(price.out.rfind("price\n", 0) == 0);

    const Run eval = cli({"evaluate", "--bundle", path("bundle.json"), "--input", path("data.csv"), "--task", "location",
                          "--report", path("eval.json")});
    CHECK(eval.code == 0);
}

TEST_CASE("benchmark price reports the constant on the same split") {
    ensure_data();
    const Run r = cli({"benchmark", "--input", path("data.csv"), "--task", "price", "--models", "sgd", "--out-dir",
                       path("bench"), "--threads", "1"});
    REQUIRE(r.code == 0);
    const auto j = json::parse(std::ifstream(path("bench/report.json")));
    const std::string text = j.dump();
    CHECK(text.find("constant") != std::string::npos);
    CHECK(text.find("sgd") != std::string::npos);
}

TEST_CASE("config file with flag overrides") {
    ensure_data();
    std::ofstream(path("config.json")) << R"({"seed": 3, "task": "location", "model": "forest",
        "hyperparameters": {"forest": {"n_trees": 4}}})";
    const Run r = cli({"train", "--config", path("config.json"), "--input", path("data.csv"), "--seed", "9", "--out",
                       path("cfg_bundle.json"), "--threads", "1"});
    REQUIRE(r.code == 0);
    const ModelBundle b = load_bundle(path("cfg_bundle.json"));
    CHECK(b.metadata.seed == 9);
    CHECK(std::get<RandomForest>(b.location->model).trees.size() == 4);
}
