#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace concert {

using ParamValue = std::variant<std::int64_t, double, std::string>;

std::string format_param(const ParamValue& value);

enum class SamplingLaw { uniform, log_uniform, integer_uniform };

std::string_view to_string(SamplingLaw law) noexcept;
SamplingLaw sampling_law_from_string(std::string_view text);

struct Dimension {
    struct Range {
        double low = 0.0;
        double high = 1.0;
        SamplingLaw law = SamplingLaw::uniform;
    };

    std::string name;
    std::vector<ParamValue> values;  // finite list, or
    std::optional<Range> range;      // bounded range

    bool is_finite() const noexcept { return !range.has_value(); }
    bool contains(const ParamValue& value) const;
};

class ParamSpace {
public:
    ParamSpace& add_list(std::string name, std::vector<ParamValue> values);
    ParamSpace& add_range(std::string name, double low, double high, SamplingLaw law);

    const std::vector<Dimension>& dimensions() const noexcept { return dims_; }
    bool empty() const noexcept { return dims_.empty(); }
    std::size_t grid_size() const;

private:
    std::vector<Dimension> dims_;
};

/// Parameter assignment in dimension order.
struct Assignment {
    std::vector<std::pair<std::string, ParamValue>> values;

    const ParamValue* find(std::string_view name) const;
    double number(std::string_view name) const;  // int or double
    std::int64_t integer(std::string_view name) const;
    std::string text(std::string_view name) const;
    double number_or(std::string_view name, double fallback) const;

    friend bool operator==(const Assignment&, const Assignment&) = default;
};

enum class Objective { minimize, maximize };

struct TrialOutcome {
    double score = 0.0;
    std::map<std::string, double> diagnostics;
};

/// Scores one assignment. Called concurrently when threads > 1.
using Evaluate = std::function<TrialOutcome(const Assignment&, std::uint64_t trial_seed)>;

struct TrialResult {
    std::size_t index = 0;
    Assignment params;
    std::uint64_t seed = 0;
    bool ok = false;
    double score = 0.0;
    std::string error;
    std::map<std::string, double> diagnostics;
    double duration_ms = 0.0;
};

struct SearchResult {
    TrialResult best;
    std::vector<TrialResult> trials;
};

struct SearchOptions {
    Objective objective = Objective::minimize;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

/// Full Cartesian product in lexicographic order (first dimension slowest).
/// Ties go to the earliest trial. Failed or non-finite trials never win.
SearchResult grid_search(const ParamSpace& space, const Evaluate& evaluate, const SearchOptions& options = {});

/// n_trials independent draws; the draw sequence depends only on the seed.
SearchResult random_search(const ParamSpace& space, std::size_t n_trials, const Evaluate& evaluate,
                           const SearchOptions& options = {});

/// One draw from every dimension.
Assignment sample_assignment(const ParamSpace& space, std::uint64_t seed, std::uint64_t draw);

/// trial,<params...>,score,status,seed[,duration_ms]
std::string trial_log_csv(const SearchResult& result, bool include_duration = true);

}  // namespace concert
