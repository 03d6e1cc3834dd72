#include "concert/data_model.hpp"

#include "concert/error.hpp"
#include "concert/random.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace concert {

std::string_view to_string(ColumnKind kind) noexcept {
    switch (kind) {
        case ColumnKind::continuous: return "continuous";
        case ColumnKind::dummy: return "dummy";
        case ColumnKind::ordinal: return "ordinal";
    }
    return "continuous";
}

ColumnKind column_kind_from_string(std::string_view text) {
    if (text == "continuous") return ColumnKind::continuous;
    if (text == "dummy") return ColumnKind::dummy;
    if (text == "ordinal") return ColumnKind::ordinal;
    fail(ErrorCode::invalid_argument, fmt::format("unknown column kind '{}'", text));
}

namespace schema {

const std::array<std::string, kGenreCount>& genres() {
    static const std::array<std::string, kGenreCount> names{
        "alternative", "blues", "classic-rock", "classical", "country", "electronic", "folk",
        "hip-hop",     "hard-rock", "indie",    "jazz",      "latin",   "punk",       "pop",
        "rap",         "reggae",    "rnb",      "rock",      "soul",    "techno"};
    return names;
}

const std::array<std::string, kDayCount>& days() {
    static const std::array<std::string, kDayCount> names{"Sun", "Mon", "Tue", "Wed", "Thu", "Fri", "Sat"};
    return names;
}

const std::vector<std::string>& concert_columns() {
    static const std::vector<std::string> columns = [] {
        std::vector<std::string> c{std::string(kPrice),      std::string(kLatitude),  std::string(kLongitude),
                                   std::string(kPopularity), std::string(kPlaycount), std::string(kPopulation),
                                   std::string(kMarketHeat), std::string(kIncome),    std::string(kDensity),
                                   std::string(kClass)};
        c.insert(c.end(), genres().begin(), genres().end());
        c.emplace_back(kGenresNum);
        c.emplace_back(kVenueCount);
        c.emplace_back(kVenueType);
        c.insert(c.end(), days().begin(), days().end());
        return c;
    }();
    return columns;
}

bool is_known(std::string_view column) {
    const auto& all = concert_columns();
    return std::find(all.begin(), all.end(), column) != all.end();
}

ColumnKind kind_of(std::string_view column) {
    const auto is_in = [&](const auto& names) {
        return std::find(names.begin(), names.end(), column) != names.end();
    };
    if (is_in(genres()) || is_in(days())) return ColumnKind::dummy;
    if (column == kVenueType || column == kClass) return ColumnKind::ordinal;
    return ColumnKind::continuous;
}

std::vector<std::string> price_features() {
    std::vector<std::string> out;
    for (const auto& c : concert_columns())
        if (c != kPrice) out.push_back(c);
    return out;
}

std::vector<std::string> location_features() {
    static const std::set<std::string_view> withheld{kClass, kLatitude, kLongitude, kPopulation, kIncome, kDensity};
    std::vector<std::string> out;
    for (const auto& c : concert_columns())
        if (!withheld.count(c)) out.push_back(c);
    return out;
}

std::vector<std::string> features_for(Task task) {
    return task == Task::price ? price_features() : location_features();
}

std::string_view target_for(Task task) { return task == Task::price ? kPrice : kClass; }

}  // namespace schema

std::vector<std::string> validate(const ConcertRecord& r) {
    std::vector<std::string> problems;
    const auto day_sum = std::accumulate(r.days.begin(), r.days.end(), 0);
    if (day_sum != 1) problems.push_back(fmt::format("expected exactly one weekday flag, found {}", day_sum));
    for (std::size_t i = 0; i < r.genres.size(); ++i)
        if (r.genres[i] > 1) problems.push_back(fmt::format("genre flag '{}' is not binary", schema::genres()[i]));
    for (std::size_t i = 0; i < r.days.size(); ++i)
        if (r.days[i] > 1) problems.push_back(fmt::format("day flag '{}' is not binary", schema::days()[i]));
    if (r.class_label < 0 || r.class_label >= kNumClasses)
        problems.push_back(fmt::format("Class {} outside 0..4", r.class_label));
    if (r.average_price && !(*r.average_price > 0.0))
        problems.push_back(fmt::format("average_price {} is not positive", *r.average_price));
    if (r.venue_type < 1 || r.venue_type > 3)
        problems.push_back(fmt::format("venue_type {} outside 1..3", r.venue_type));
    if (r.concert_popularity < 0.0 || r.concert_popularity > 1.0)
        problems.push_back(fmt::format("concert_popularity {} outside [0,1]", r.concert_popularity));
    for (auto [name, v] : {std::pair{"playcount", r.playcount},
                           std::pair{"Population_Estimate_2017", r.population_estimate_2017},
                           std::pair{"market_heat", r.market_heat},
                           std::pair{"Estimated_per_capita_income", r.estimated_per_capita_income},
                           std::pair{"Population_density", r.population_density},
                           std::pair{"genres_num", r.genres_num},
                           std::pair{"venue_concert_count", r.venue_concert_count}})
        if (v < 0.0) problems.push_back(fmt::format("{} {} is negative", name, v));
    return problems;
}

std::optional<std::size_t> RawTable::find_column(std::string_view name) const {
    auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) return std::nullopt;
    return static_cast<std::size_t>(it - columns.begin());
}

std::size_t RawTable::column_index(std::string_view name) const {
    if (auto idx = find_column(name)) return *idx;
    fail(ErrorCode::schema_mismatch, fmt::format("missing column: {}", name));
}

CsvSchema concert_csv_schema() {
    CsvSchema s;
    s.required = schema::concert_columns();
    s.numeric = schema::concert_columns();
    return s;
}

CsvSchema city_csv_schema() {
    return CsvSchema{{"city", "income_per_capita", "population_density"},
                     {"income_per_capita", "population_density"}};
}

std::optional<double> parse_number(std::string_view text) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
    if (text.empty()) return std::nullopt;
    if (text.front() == '+') text.remove_prefix(1);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value)) return std::nullopt;
    return value;
}

std::string format_number(double value) { return fmt::format("{}", value); }

namespace {

bool is_missing_marker(std::string_view cell) { return cell.empty() || cell == "NA"; }

// RFC 4180 records: quoted fields may contain separators, quotes ("") and newlines.
std::vector<std::vector<std::string>> split_records(std::string_view text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool quoted = false;
    bool any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
            any = true;
        } else if (c == ',') {
            record.push_back(std::move(field));
            field.clear();
            any = true;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            if (any || !field.empty()) {
                record.push_back(std::move(field));
                records.push_back(std::move(record));
            }
            record.clear();
            field.clear();
            any = false;
        } else {
            field += c;
            any = true;
        }
    }
    if (quoted) fail(ErrorCode::io, "unterminated quoted field");
    if (any || !field.empty()) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
    }
    return records;
}

}  // namespace

RawTable parse_csv(std::string_view text, const CsvSchema& schema) {
    if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
    auto records = split_records(text);
    if (records.empty()) fail(ErrorCode::schema_mismatch, "missing header row");

    RawTable table;
    table.columns = std::move(records.front());
    for (auto& name : table.columns) {
        while (!name.empty() && name.back() == ' ') name.pop_back();
        while (!name.empty() && name.front() == ' ') name.erase(name.begin());
    }

    std::vector<std::string> missing;
    for (const auto& name : schema.required)
        if (!table.find_column(name)) missing.push_back(name);
    if (!missing.empty())
        fail(ErrorCode::schema_mismatch, fmt::format("header is missing columns: {}", fmt::join(missing, ", ")));

    std::vector<bool> numeric(table.columns.size(), false);
    for (const auto& name : schema.numeric)
        if (auto idx = table.find_column(name)) numeric[*idx] = true;

    table.rows.reserve(records.size() - 1);
    for (std::size_t r = 1; r < records.size(); ++r) {
        auto& rec = records[r];
        if (rec.size() != table.columns.size())
            fail(ErrorCode::schema_mismatch, fmt::format("row {} has {} fields, header has {}", r, rec.size(),
                                                         table.columns.size()));
        std::vector<Cell> row(rec.size());
        for (std::size_t c = 0; c < rec.size(); ++c) {
            if (is_missing_marker(rec[c])) continue;
            if (numeric[c] && !parse_number(rec[c])) continue;
            row[c] = std::move(rec[c]);
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

RawTable load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::io, fmt::format("cannot open {}", path.string()));
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_csv(buffer.str(), schema);
}

namespace {

std::string quote_field(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

}  // namespace

std::string to_csv(const RawTable& table) {
    std::string out;
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        if (c) out += ',';
        out += quote_field(table.columns[c]);
    }
    out += '\n';
    for (const auto& row : table.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out += ',';
            out += row[c] ? quote_field(*row[c]) : std::string("NA");
        }
        out += '\n';
    }
    return out;
}

void save_csv(const std::filesystem::path& path, const RawTable& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::io, fmt::format("cannot write {}", path.string()));
    out << to_csv(table);
}

namespace {

double cell_number(const RawTable& table, std::size_t row, std::size_t col) {
    const auto& cell = table.rows[row][col];
    if (!cell) fail(ErrorCode::missing_value, fmt::format("row {} column {} is missing", row, table.columns[col]));
    auto v = parse_number(*cell);
    if (!v)
        fail(ErrorCode::invalid_argument,
             fmt::format("row {} column {}: '{}' is not a number", row, table.columns[col], *cell));
    return *v;
}

std::uint8_t flag(double v) { return v == 0.0 ? 0 : (v == 1.0 ? 1 : 2); }

}  // namespace

ConcertRecord concert_from_row(const RawTable& table, std::size_t row) {
    ConcertRecord r;
    auto num = [&](std::string_view name) { return cell_number(table, row, table.column_index(name)); };
    if (const auto& cell = table.rows[row][table.column_index(schema::kPrice)]) r.average_price = parse_number(*cell);
    r.latitude = num(schema::kLatitude);
    r.longitude = num(schema::kLongitude);
    r.concert_popularity = num(schema::kPopularity);
    r.playcount = num(schema::kPlaycount);
    r.population_estimate_2017 = num(schema::kPopulation);
    r.market_heat = num(schema::kMarketHeat);
    r.estimated_per_capita_income = num(schema::kIncome);
    r.population_density = num(schema::kDensity);
    r.class_label = static_cast<int>(num(schema::kClass));
    for (std::size_t g = 0; g < schema::kGenreCount; ++g) r.genres[g] = flag(num(schema::genres()[g]));
    r.genres_num = num(schema::kGenresNum);
    r.venue_concert_count = num(schema::kVenueCount);
    r.venue_type = static_cast<int>(num(schema::kVenueType));
    for (std::size_t d = 0; d < schema::kDayCount; ++d) r.days[d] = flag(num(schema::days()[d]));
    return r;
}

RawTable concerts_to_table(const std::vector<ConcertRecord>& records) {
    RawTable table;
    table.columns = schema::concert_columns();
    for (const auto& r : records) {
        std::vector<Cell> row;
        row.reserve(table.columns.size());
        auto put = [&](double v) { row.emplace_back(format_number(v)); };
        if (r.average_price) put(*r.average_price);
        else row.emplace_back(std::nullopt);
        put(r.latitude);
        put(r.longitude);
        put(r.concert_popularity);
        put(r.playcount);
        put(r.population_estimate_2017);
        put(r.market_heat);
        put(r.estimated_per_capita_income);
        put(r.population_density);
        put(r.class_label);
        for (auto g : r.genres) put(g);
        put(r.genres_num);
        put(r.venue_concert_count);
        put(r.venue_type);
        for (auto d : r.days) put(d);
        table.rows.push_back(std::move(row));
    }
    return table;
}

RawTable impute_most_frequent(const RawTable& table, std::string_view column) {
    const std::size_t col = table.column_index(column);

    bool numeric = true;
    bool any_missing = false;
    bool any_present = false;
    for (const auto& row : table.rows) {
        if (!row[col]) {
            any_missing = true;
            continue;
        }
        any_present = true;
        if (!parse_number(*row[col])) numeric = false;
    }
    if (!any_present) fail(ErrorCode::missing_value, fmt::format("column {} has no values to impute from", column));
    if (!any_missing) return table;

    std::string mode;
    if (numeric) {
        // Count by numeric value so "1" and "1.0" agree; keep the first spelling seen.
        std::map<double, std::pair<std::size_t, std::string>> counts;
        for (const auto& row : table.rows) {
            if (!row[col]) continue;
            auto& entry = counts[*parse_number(*row[col])];
            if (entry.first++ == 0) entry.second = *row[col];
        }
        std::size_t best = 0;
        for (const auto& [value, entry] : counts)  // ascending value: first max wins
            if (entry.first > best) {
                best = entry.first;
                mode = entry.second;
            }
    } else {
        std::map<std::string, std::size_t> counts;
        for (const auto& row : table.rows)
            if (row[col]) ++counts[*row[col]];
        std::size_t best = 0;
        for (const auto& [value, count] : counts)
            if (count > best) {
                best = count;
                mode = value;
            }
    }

    RawTable out = table;
    for (auto& row : out.rows)
        if (!row[col]) row[col] = mode;
    return out;
}

RawTable impute_columns(const RawTable& table, const std::vector<std::string>& columns) {
    RawTable out = table;
    for (const auto& c : columns) out = impute_most_frequent(out, c);
    return out;
}

RawTable select_columns(const RawTable& table, const std::vector<std::string>& columns) {
    std::vector<std::size_t> idx;
    std::vector<std::string> missing;
    for (const auto& c : columns) {
        if (auto i = table.find_column(c)) idx.push_back(*i);
        else missing.push_back(c);
    }
    if (!missing.empty())
        fail(ErrorCode::schema_mismatch, fmt::format("missing columns: {}", fmt::join(missing, ", ")));
    RawTable out;
    out.columns = columns;
    out.rows.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        std::vector<Cell> r;
        r.reserve(idx.size());
        for (auto i : idx) r.push_back(row[i]);
        out.rows.push_back(std::move(r));
    }
    return out;
}

RawTable drop_missing(const RawTable& table, std::string_view column) {
    const std::size_t col = table.column_index(column);
    RawTable out;
    out.columns = table.columns;
    for (const auto& row : table.rows)
        if (row[col]) out.rows.push_back(row);
    return out;
}

std::optional<std::size_t> FeatureMatrix::find_column(std::string_view name) const {
    auto it = std::find(column_names.begin(), column_names.end(), name);
    if (it == column_names.end()) return std::nullopt;
    return static_cast<std::size_t>(it - column_names.begin());
}

std::size_t FeatureMatrix::column_index(std::string_view name) const {
    if (auto idx = find_column(name)) return *idx;
    fail(ErrorCode::schema_mismatch, fmt::format("unknown feature column: {}", name));
}

FeatureMatrix FeatureMatrix::take_rows(const std::vector<std::size_t>& indices) const {
    FeatureMatrix out;
    out.column_names = column_names;
    out.column_kinds = column_kinds;
    out.values.resize(static_cast<Eigen::Index>(indices.size()), values.cols());
    for (std::size_t i = 0; i < indices.size(); ++i)
        out.values.row(static_cast<Eigen::Index>(i)) = values.row(static_cast<Eigen::Index>(indices[i]));
    return out;
}

namespace {

bool is_weekday_column(std::string_view name, const std::set<std::string>& values) {
    static const std::set<std::string_view> names{"day", "weekday", "day_of_week"};
    const auto& d = schema::days();
    return names.count(name) &&
           std::all_of(values.begin(), values.end(),
                       [&](const std::string& v) { return std::find(d.begin(), d.end(), v) != d.end(); });
}

}  // namespace

DummyEncoder DummyEncoder::fit(const RawTable& table, const std::vector<std::string>& categorical_columns) {
    DummyEncoder enc;
    for (const auto& name : categorical_columns) {
        const std::size_t col = table.column_index(name);
        std::set<std::string> values;
        for (const auto& row : table.rows)
            if (row[col]) values.insert(*row[col]);
        if (values.empty()) fail(ErrorCode::missing_value, fmt::format("categorical column {} has no values", name));
        if (is_weekday_column(name, values))
            enc.vocabularies_[name] = {schema::days().begin(), schema::days().end()};
        else
            enc.vocabularies_[name] = {values.begin(), values.end()};
    }
    return enc;
}

FeatureMatrix DummyEncoder::transform(const RawTable& table) const {
    struct Source {
        std::size_t col;
        const std::vector<std::string>* vocabulary;
    };
    FeatureMatrix out;
    std::vector<Source> sources;
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        const auto& name = table.columns[c];
        auto it = vocabularies_.find(name);
        if (it == vocabularies_.end()) {
            sources.push_back({c, nullptr});
            out.column_names.push_back(name);
            out.column_kinds.push_back(schema::kind_of(name));
            continue;
        }
        sources.push_back({c, &it->second});
        for (const auto& value : it->second) {
            if (table.find_column(value))
                fail(ErrorCode::schema_mismatch,
                     fmt::format("dummy column '{}' of {} collides with an existing column", value, name));
            out.column_names.push_back(value);
            out.column_kinds.push_back(ColumnKind::dummy);
        }
    }
    for (const auto& [name, vocab] : vocabularies_)
        if (!table.find_column(name)) fail(ErrorCode::schema_mismatch, fmt::format("missing column: {}", name));

    const auto m = static_cast<Eigen::Index>(table.row_count());
    out.values = Matrix::Zero(m, static_cast<Eigen::Index>(out.column_names.size()));
    for (Eigen::Index r = 0; r < m; ++r) {
        Eigen::Index j = 0;
        for (const auto& src : sources) {
            const auto& cell = table.rows[static_cast<std::size_t>(r)][src.col];
            if (!src.vocabulary) {
                out.values(r, j++) = cell_number(table, static_cast<std::size_t>(r), src.col);
                continue;
            }
            if (!cell)
                fail(ErrorCode::missing_value,
                     fmt::format("row {} column {} is missing", r, table.columns[src.col]));
            auto pos = std::find(src.vocabulary->begin(), src.vocabulary->end(), *cell);
            if (pos == src.vocabulary->end())
                fail(ErrorCode::unseen_category,
                     fmt::format("column {}: unseen category '{}'", table.columns[src.col], *cell));
            out.values(r, j + (pos - src.vocabulary->begin())) = 1.0;
            j += static_cast<Eigen::Index>(src.vocabulary->size());
        }
    }
    return out;
}

FeatureMatrix encode_dummies(const RawTable& table, const std::vector<std::string>& categorical_columns) {
    return DummyEncoder::fit(table, categorical_columns).transform(table);
}

SplitIndices split_indices(std::size_t rows, const SplitSpec& spec) {
    if (rows < 2) fail(ErrorCode::invalid_argument, "train/test split needs at least 2 rows");
    if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0))
        fail(ErrorCode::invalid_argument, fmt::format("test_fraction {} outside (0,1)", spec.test_fraction));

    std::vector<std::size_t> perm(rows);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng = make_rng(spec.seed, 0x5117);
    for (std::size_t i = rows - 1; i > 0; --i) std::swap(perm[i], perm[uniform_index(rng, i + 1)]);

    const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(rows) * (1.0 - spec.test_fraction) + 1e-9));
    const std::size_t n_test = std::clamp<std::size_t>(rows - n_train, 1, rows - 1);
    SplitIndices out;
    out.test.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
    out.train.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_test), perm.end());
    std::sort(out.test.begin(), out.test.end());
    std::sort(out.train.begin(), out.train.end());
    return out;
}

Vector take(const Vector& v, const std::vector<std::size_t>& indices) {
    Vector out(static_cast<Eigen::Index>(indices.size()));
    for (std::size_t i = 0; i < indices.size(); ++i)
        out(static_cast<Eigen::Index>(i)) = v(static_cast<Eigen::Index>(indices[i]));
    return out;
}

Labels take(const Labels& v, const std::vector<std::size_t>& indices) {
    Labels out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(v[i]);
    return out;
}

namespace {

template <typename Target>
Split<Target> split_impl(const FeatureMatrix& x, const Target& y, const SplitSpec& spec) {
    const auto n = static_cast<std::size_t>(y.size());
    if (x.rows() != n)
        fail(ErrorCode::invalid_argument, fmt::format("X has {} rows but y has {} entries", x.rows(), n));
    Split<Target> s;
    s.indices = split_indices(n, spec);
    s.train_x = x.take_rows(s.indices.train);
    s.test_x = x.take_rows(s.indices.test);
    s.train_y = take(y, s.indices.train);
    s.test_y = take(y, s.indices.test);
    return s;
}

}  // namespace

Split<Vector> train_test_split(const FeatureMatrix& x, const Vector& y, const SplitSpec& spec) {
    return split_impl(x, y, spec);
}

Split<Labels> train_test_split(const FeatureMatrix& x, const Labels& y, const SplitSpec& spec) {
    return split_impl(x, y, spec);
}

Vector numeric_column(const RawTable& table, std::string_view column) {
    const std::size_t col = table.column_index(column);
    Vector out(static_cast<Eigen::Index>(table.row_count()));
    for (std::size_t r = 0; r < table.row_count(); ++r) out(static_cast<Eigen::Index>(r)) = cell_number(table, r, col);
    return out;
}

Labels label_column(const RawTable& table, std::string_view column) {
    const Vector v = numeric_column(table, column);
    Labels out;
    out.reserve(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double x = v(i);
        if (x != std::floor(x) || x < 0 || x >= kNumClasses)
            fail(ErrorCode::invalid_argument, fmt::format("row {} column {}: label {} outside 0..4", i, column, x));
        out.push_back(static_cast<int>(x));
    }
    return out;
}

}  // namespace concert
