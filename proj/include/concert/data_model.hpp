#pragma once

#include "concert/types.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace concert {

enum class ColumnKind { continuous, dummy, ordinal };

std::string_view to_string(ColumnKind kind) noexcept;
ColumnKind column_kind_from_string(std::string_view text);

// Concert CSV schema. Column names follow the published variable table; the
// genre and weekday indicators are already one-hot in the source snapshots.
namespace schema {

inline constexpr std::string_view kPrice = "average_price";
inline constexpr std::string_view kLatitude = "latitude";
inline constexpr std::string_view kLongitude = "longitude";
inline constexpr std::string_view kPopularity = "concert_popularity";
inline constexpr std::string_view kPlaycount = "playcount";
inline constexpr std::string_view kPopulation = "Population_Estimate_2017";
inline constexpr std::string_view kMarketHeat = "market_heat";
inline constexpr std::string_view kIncome = "Estimated_per_capita_income";
inline constexpr std::string_view kDensity = "Population_density";
inline constexpr std::string_view kClass = "Class";
inline constexpr std::string_view kGenresNum = "genres_num";
inline constexpr std::string_view kVenueCount = "venue_concert_count";
inline constexpr std::string_view kVenueType = "venue_type";

inline constexpr std::size_t kGenreCount = 20;
inline constexpr std::size_t kDayCount = 7;

const std::array<std::string, kGenreCount>& genres();
const std::array<std::string, kDayCount>& days();

/// Every column of a concert snapshot, in file order.
const std::vector<std::string>& concert_columns();

/// Kind of a known schema column; unknown names are continuous.
ColumnKind kind_of(std::string_view column);
bool is_known(std::string_view column);

/// 39 covariates of the price task: everything except the price itself.
std::vector<std::string> price_features();
/// 34 covariates of the location task: city-level fields that define the
/// class (income, density, population) and the coordinates are withheld.
std::vector<std::string> location_features();

std::vector<std::string> features_for(Task task);
std::string_view target_for(Task task);

}  // namespace schema

/// One concert row. Binary fields hold 0/1.
struct ConcertRecord {
    std::optional<double> average_price;
    double latitude = 0.0;
    double longitude = 0.0;
    double concert_popularity = 0.0;
    double playcount = 0.0;
    double population_estimate_2017 = 0.0;
    double market_heat = 0.0;
    double estimated_per_capita_income = 0.0;
    double population_density = 0.0;
    int class_label = 0;
    std::array<std::uint8_t, schema::kGenreCount> genres{};
    double genres_num = 0.0;
    double venue_concert_count = 0.0;
    int venue_type = 1;
    std::array<std::uint8_t, schema::kDayCount> days{};
};

/// Human-readable invariant violations; empty when the record is valid.
std::vector<std::string> validate(const ConcertRecord& record);

using Cell = std::optional<std::string>;

/// Header plus rows of optional text cells. Missing cells are std::nullopt.
struct RawTable {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    std::size_t row_count() const noexcept { return rows.size(); }
    std::optional<std::size_t> find_column(std::string_view name) const;
    /// Throws schema_mismatch when absent.
    std::size_t column_index(std::string_view name) const;
};

/// Columns a CSV must carry, and which of them hold numbers.
struct CsvSchema {
    std::vector<std::string> required;
    std::vector<std::string> numeric;
};

CsvSchema concert_csv_schema();
CsvSchema city_csv_schema();

/// Parses a CSV file. Empty cells and `NA` become missing; cells of numeric
/// columns that do not parse as numbers also become missing.
RawTable load_csv(const std::filesystem::path& path, const CsvSchema& schema);
RawTable parse_csv(std::string_view text, const CsvSchema& schema);

/// Writes `NA` for missing cells and quotes fields that need it.
std::string to_csv(const RawTable& table);
void save_csv(const std::filesystem::path& path, const RawTable& table);

std::optional<double> parse_number(std::string_view text);
std::string format_number(double value);

ConcertRecord concert_from_row(const RawTable& table, std::size_t row);
RawTable concerts_to_table(const std::vector<ConcertRecord>& records);

/// Replaces missing cells of `column` with the modal value. Numeric columns
/// break ties by smallest value, text columns lexicographically.
RawTable impute_most_frequent(const RawTable& table, std::string_view column);
/// Imputes every listed column that has at least one missing cell.
RawTable impute_columns(const RawTable& table, const std::vector<std::string>& columns);

RawTable select_columns(const RawTable& table, const std::vector<std::string>& columns);
/// Drops rows whose `column` is missing.
RawTable drop_missing(const RawTable& table, std::string_view column);

struct FeatureMatrix {
    Matrix values;
    std::vector<std::string> column_names;
    std::vector<ColumnKind> column_kinds;

    std::size_t rows() const noexcept { return static_cast<std::size_t>(values.rows()); }
    std::size_t cols() const noexcept { return static_cast<std::size_t>(values.cols()); }
    std::optional<std::size_t> find_column(std::string_view name) const;
    std::size_t column_index(std::string_view name) const;
    FeatureMatrix take_rows(const std::vector<std::size_t>& indices) const;
};

/// One-hot encoder with a frozen vocabulary per categorical column.
///
/// Vocabularies are sorted, except for a column named day, weekday or
/// day_of_week holding day names, which always expands to all seven days in
/// Sun..Sat order. Non-categorical columns must be
/// numeric and complete; their kind comes from the concert schema.
class DummyEncoder {
public:
    static DummyEncoder fit(const RawTable& table, const std::vector<std::string>& categorical_columns);

    /// Throws unseen_category naming the column and value.
    FeatureMatrix transform(const RawTable& table) const;

    const std::map<std::string, std::vector<std::string>>& vocabularies() const noexcept {
        return vocabularies_;
    }

private:
    std::map<std::string, std::vector<std::string>> vocabularies_;
};

FeatureMatrix encode_dummies(const RawTable& table, const std::vector<std::string>& categorical_columns);

struct SplitSpec {
    double test_fraction = 0.2;
    std::uint64_t seed = 0;
};

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// |train| = floor(M * (1 - test_fraction)), the remainder is test; the permutation depends only on the seed.
SplitIndices split_indices(std::size_t rows, const SplitSpec& spec);

template <typename Target>
struct Split {
    FeatureMatrix train_x;
    Target train_y;
    FeatureMatrix test_x;
    Target test_y;
    SplitIndices indices;
};

Split<Vector> train_test_split(const FeatureMatrix& x, const Vector& y, const SplitSpec& spec);
Split<Labels> train_test_split(const FeatureMatrix& x, const Labels& y, const SplitSpec& spec);

Vector take(const Vector& v, const std::vector<std::size_t>& indices);
Labels take(const Labels& v, const std::vector<std::size_t>& indices);

/// Parses a numeric column of a complete table.
Vector numeric_column(const RawTable& table, std::string_view column);
Labels label_column(const RawTable& table, std::string_view column);

}  // namespace concert
