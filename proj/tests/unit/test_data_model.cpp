#include <doctest.h>

#include "concert/data_model.hpp"
#include "concert/error.hpp"
#include "concert/evaluation.hpp"
#include "concert/random.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>

using namespace concert;

namespace {

std::filesystem::path temp_file(const std::string& name, const std::string& text) {
    const auto dir = std::filesystem::temp_directory_path() / "concert_unit";
    std::filesystem::create_directories(dir);
    const auto path = dir / name;
    std::ofstream(path) << text;
    return path;
}

RawTable one_column(std::vector<Cell> cells) {
    RawTable t;
    t.columns = {"c"};
    for (auto& c : cells) t.rows.push_back({c});
    return t;
}

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::invalid_argument;
}

std::string fixture_csv(std::size_t rows) {
    SyntheticSpec spec;
    spec.rows = rows;
    spec.seed = 3;
    return to_csv(generate_synthetic(spec).concerts);
}

}  // namespace

TEST_CASE("schema sizes") {
    CHECK(schema::concert_columns().size() == 40);
    CHECK(schema::price_features().size() == 39);
    CHECK(schema::location_features().size() == 34);
    std::size_t dummies = 0;
    for (const auto& c : schema::price_features()) dummies += schema::kind_of(c) == ColumnKind::dummy;
    CHECK(dummies == 27);
    CHECK(schema::kind_of(schema::kVenueType) == ColumnKind::ordinal);
}

TEST_CASE("record validation") {
    ConcertRecord r;
    r.average_price = 50.0;
    r.days[3] = 1;
    CHECK(validate(r).empty());
    r.days[4] = 1;
    CHECK_FALSE(validate(r).empty());
    r.days[4] = 0;
    r.class_label = 5;
    CHECK_FALSE(validate(r).empty());
    r.class_label = 0;
    r.average_price = 0.0;
    CHECK_FALSE(validate(r).empty());
}

TEST_CASE("load_csv") {
    const std::string text = fixture_csv(3);
    const std::string header = text.substr(0, text.find('\n') + 1);

    SUBCASE("header only") {
        CHECK(load_csv(temp_file("header.csv", header), concert_csv_schema()).row_count() == 0);
    }
    SUBCASE("three rows map every column") {
        const RawTable t = load_csv(temp_file("three.csv", text), concert_csv_schema());
        REQUIRE(t.row_count() == 3);
        CHECK(t.columns == schema::concert_columns());
        for (std::size_t r = 0; r < 3; ++r) CHECK(validate(concert_from_row(t, r)).empty());
    }
    SUBCASE("missing average_price is named") {
        const std::string cut = "latitude,longitude\n1,2\n";
        try {
            load_csv(temp_file("cut.csv", cut), concert_csv_schema());
            FAIL("expected schema mismatch");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::schema_mismatch);
            CHECK(std::string(e.what()).find("average_price") != std::string::npos);
        }
    }
    SUBCASE("missing file") {
        CHECK(code_of([] { load_csv("/nonexistent/x.csv", concert_csv_schema()); }) == ErrorCode::io);
    }
    SUBCASE("unparseable and NA cells become missing") {
        const RawTable t =
            parse_csv("city,income_per_capita,population_density\na,abc,NA\nb,,3\n", city_csv_schema());
        CHECK_FALSE(t.rows[0][1].has_value());
        CHECK_FALSE(t.rows[0][2].has_value());
        CHECK_FALSE(t.rows[1][1].has_value());
        CHECK(*t.rows[1][2] == "3");
    }
    SUBCASE("round trip through text") {
        const RawTable t = parse_csv(text, concert_csv_schema());
        CHECK(to_csv(t) == text);
    }
}

TEST_CASE("impute_most_frequent") {
    const auto col = [](const RawTable& t) {
        std::vector<Cell> out;
        for (const auto& r : t.rows) out.push_back(r[0]);
        return out;
    };
    CHECK(col(impute_most_frequent(one_column({"a", "a", "b", std::nullopt}), "c")) ==
          std::vector<Cell>{"a", "a", "b", "a"});
    CHECK(col(impute_most_frequent(one_column({"b", "a", std::nullopt}), "c")) == std::vector<Cell>{"b", "a", "a"});
    CHECK(col(impute_most_frequent(one_column({"10", "9", std::nullopt}), "c")).back() == "9");
    const RawTable full = one_column({"x", "y"});
    CHECK(col(impute_most_frequent(full, "c")) == col(full));
    CHECK(code_of([] { impute_most_frequent(one_column({std::nullopt, std::nullopt}), "c"); }) ==
          ErrorCode::missing_value);
}

TEST_CASE("imputation never alters present cells") {
    Rng rng = make_rng(7, 0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Cell> cells;
        for (int i = 0; i < 30; ++i) {
            if (uniform01(rng) < 0.3) cells.push_back(std::nullopt);
            else cells.push_back(std::string(1, static_cast<char>('a' + uniform_index(rng, 4))));
        }
        cells[0] = "a";
        const RawTable out = impute_most_frequent(one_column(cells), "c");
        for (std::size_t i = 0; i < cells.size(); ++i) {
            REQUIRE(out.rows[i][0].has_value());
            if (cells[i]) CHECK(*out.rows[i][0] == *cells[i]);
        }
    }
}

TEST_CASE("encode_dummies") {
    SUBCASE("two observed categories") {
        const FeatureMatrix x = encode_dummies(one_column({"Mon", "Tue", "Mon"}), {"c"});
        CHECK(x.column_names == std::vector<std::string>{"Mon", "Tue"});
        CHECK(x.values.col(0).transpose() == Eigen::RowVector3d(1, 0, 1));
        CHECK(x.values.col(1).transpose() == Eigen::RowVector3d(0, 1, 0));
    }
    SUBCASE("single category") {
        const FeatureMatrix x = encode_dummies(one_column({"z", "z"}), {"c"});
        CHECK(x.cols() == 1);
        CHECK(x.values.sum() == 2);
    }
    SUBCASE("a named day column expands to the full week") {
        RawTable t = one_column({"Sat", "Mon"});
        t.columns = {"day"};
        const FeatureMatrix x = encode_dummies(t, {"day"});
        CHECK(x.cols() == 7);
        CHECK(x.values.row(0).sum() == 1);
    }
    SUBCASE("unseen category at transform time") {
        const DummyEncoder enc = DummyEncoder::fit(one_column({"a", "b"}), {"c"});
        try {
            enc.transform(one_column({"q"}));
            FAIL("expected unseen category");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::unseen_category);
            CHECK(std::string(e.what()).find("'q'") != std::string::npos);
        }
    }
    SUBCASE("full schema carries 27 dummies") {
        const RawTable t = parse_csv(fixture_csv(20), concert_csv_schema());
        const FeatureMatrix x = encode_dummies(select_columns(t, schema::price_features()), {});
        CHECK(x.cols() == 39);
        CHECK(std::count(x.column_kinds.begin(), x.column_kinds.end(), ColumnKind::dummy) == 27);
        for (const auto& day : schema::days()) CHECK(x.find_column(day).has_value());
    }
    SUBCASE("dummies of one source sum to one per row") {
        Rng rng = make_rng(11, 0);
        std::vector<Cell> cells;
        for (int i = 0; i < 50; ++i) cells.push_back(std::string(1, static_cast<char>('p' + uniform_index(rng, 5))));
        const FeatureMatrix x = encode_dummies(one_column(cells), {"c"});
        for (Eigen::Index r = 0; r < x.values.rows(); ++r) CHECK(x.values.row(r).sum() == 1.0);
    }
}

TEST_CASE("train_test_split sizes and partition") {
    CHECK(split_indices(9594, {0.2, 1}).train.size() == 7675);
    CHECK(split_indices(9594, {0.2, 1}).test.size() == 1919);
    CHECK(split_indices(10, {0.2, 1}).test.size() == 2);
    CHECK(split_indices(10, {0.2, 5}).test == split_indices(10, {0.2, 5}).test);
    CHECK(code_of([] { split_indices(1, {0.2, 0}); }) == ErrorCode::invalid_argument);
    CHECK(code_of([] { split_indices(10, {1.0, 0}); }) == ErrorCode::invalid_argument);

    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const std::size_t m = 2 + seed * 7;
        const SplitIndices s = split_indices(m, {0.3, seed});
        std::set<std::size_t> all(s.train.begin(), s.train.end());
        all.insert(s.test.begin(), s.test.end());
        CHECK(all.size() == m);
        CHECK(s.train.size() + s.test.size() == m);
        CHECK(*all.rbegin() == m - 1);
    }
}

TEST_CASE("train_test_split keeps rows aligned with targets") {
    FeatureMatrix x;
    x.values.resize(10, 1);
    x.column_names = {"v"};
    x.column_kinds = {ColumnKind::continuous};
    Vector y(10);
    for (int i = 0; i < 10; ++i) x.values(i, 0) = y(i) = i;
    const auto split = train_test_split(x, y, {0.2, 9});
    CHECK(split.train_x.values.col(0) == split.train_y);
    CHECK(split.test_x.values.col(0) == split.test_y);
}
