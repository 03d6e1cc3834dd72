#include "concert/tuning.hpp"

#include "concert/data_model.hpp"
#include "concert/error.hpp"
#include "concert/random.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>

namespace concert {

std::string format_param(const ParamValue& value) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::string>) return v;
            else if constexpr (std::is_same_v<T, double>) return format_number(v);
            else return fmt::format("{}", v);
        },
        value);
}

std::string_view to_string(SamplingLaw law) noexcept {
    switch (law) {
        case SamplingLaw::uniform: return "uniform";
        case SamplingLaw::log_uniform: return "log_uniform";
        case SamplingLaw::integer_uniform: return "integer_uniform";
    }
    return "uniform";
}

SamplingLaw sampling_law_from_string(std::string_view text) {
    if (text == "uniform") return SamplingLaw::uniform;
    if (text == "log_uniform" || text == "log-uniform") return SamplingLaw::log_uniform;
    if (text == "integer_uniform" || text == "integer-uniform" || text == "int") return SamplingLaw::integer_uniform;
    fail(ErrorCode::invalid_argument, fmt::format("unknown sampling law '{}'", text));
}

bool Dimension::contains(const ParamValue& value) const {
    if (!range) {
        for (const auto& v : values)
            if (v == value) return true;
        return false;
    }
    double x;
    if (const auto* i = std::get_if<std::int64_t>(&value)) x = static_cast<double>(*i);
    else if (const auto* d = std::get_if<double>(&value)) x = *d;
    else return false;
    return x >= range->low && x <= range->high;
}

ParamSpace& ParamSpace::add_list(std::string name, std::vector<ParamValue> values) {
    if (values.empty()) fail(ErrorCode::invalid_argument, fmt::format("dimension {} has an empty value list", name));
    dims_.push_back({std::move(name), std::move(values), std::nullopt});
    return *this;
}

ParamSpace& ParamSpace::add_range(std::string name, double low, double high, SamplingLaw law) {
    if (!(low < high)) fail(ErrorCode::invalid_argument, fmt::format("dimension {} needs low < high", name));
    if (law == SamplingLaw::log_uniform && !(low > 0.0))
        fail(ErrorCode::invalid_argument, fmt::format("log-uniform dimension {} needs a positive lower bound", name));
    dims_.push_back({std::move(name), {}, Dimension::Range{low, high, law}});
    return *this;
}

std::size_t ParamSpace::grid_size() const {
    std::size_t n = 1;
    for (const auto& d : dims_) {
        if (!d.is_finite()) fail(ErrorCode::invalid_argument, fmt::format("dimension {} is a range, not a list", d.name));
        n *= d.values.size();
    }
    return n;
}

const ParamValue* Assignment::find(std::string_view name) const {
    for (const auto& [k, v] : values)
        if (k == name) return &v;
    return nullptr;
}

double Assignment::number(std::string_view name) const {
    const auto* v = find(name);
    if (!v) fail(ErrorCode::invalid_argument, fmt::format("assignment has no parameter {}", name));
    if (const auto* i = std::get_if<std::int64_t>(v)) return static_cast<double>(*i);
    if (const auto* d = std::get_if<double>(v)) return *d;
    fail(ErrorCode::invalid_argument, fmt::format("parameter {} is not numeric", name));
}

std::int64_t Assignment::integer(std::string_view name) const {
    const double x = number(name);
    if (x != std::floor(x)) fail(ErrorCode::invalid_argument, fmt::format("parameter {} is not an integer", name));
    return static_cast<std::int64_t>(x);
}

std::string Assignment::text(std::string_view name) const {
    const auto* v = find(name);
    if (!v) fail(ErrorCode::invalid_argument, fmt::format("assignment has no parameter {}", name));
    return format_param(*v);
}

double Assignment::number_or(std::string_view name, double fallback) const {
    return find(name) ? number(name) : fallback;
}

Assignment sample_assignment(const ParamSpace& space, std::uint64_t seed, std::uint64_t draw) {
    Rng rng = make_rng(seed, draw);
    Assignment a;
    for (const auto& d : space.dimensions()) {
        if (d.is_finite()) {
            a.values.emplace_back(d.name, d.values[uniform_index(rng, d.values.size())]);
            continue;
        }
        const auto& r = *d.range;
        const double u = uniform01(rng);
        switch (r.law) {
            case SamplingLaw::uniform:
                a.values.emplace_back(d.name, r.low + u * (r.high - r.low));
                break;
            case SamplingLaw::log_uniform:
                a.values.emplace_back(d.name, std::exp(std::log(r.low) + u * (std::log(r.high) - std::log(r.low))));
                break;
            case SamplingLaw::integer_uniform: {
                const auto lo = static_cast<std::int64_t>(std::ceil(r.low));
                const auto hi = static_cast<std::int64_t>(std::floor(r.high));
                if (hi < lo) fail(ErrorCode::invalid_argument, fmt::format("dimension {} contains no integer", d.name));
                const auto span = static_cast<std::size_t>(hi - lo + 1);
                a.values.emplace_back(d.name, lo + static_cast<std::int64_t>(uniform_index(rng, span)));
                break;
            }
        }
    }
    return a;
}

namespace {

void run_trials(std::vector<TrialResult>& trials, const Evaluate& evaluate, unsigned threads) {
    parallel_for(
        trials.size(),
        [&](std::size_t i) {
            auto& t = trials[i];
            const auto start = std::chrono::steady_clock::now();
            try {
                TrialOutcome outcome = evaluate(t.params, t.seed);
                t.diagnostics = std::move(outcome.diagnostics);
                t.score = outcome.score;
                t.ok = std::isfinite(outcome.score);
                if (!t.ok) t.error = "non-finite score";
            } catch (const std::exception& e) {
                t.ok = false;
                t.error = e.what();
            }
            t.duration_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        },
        threads);
}

SearchResult pick_best(std::vector<TrialResult> trials, Objective objective) {
    SearchResult result;
    const TrialResult* best = nullptr;
    for (const auto& t : trials) {
        if (!t.ok) continue;
        if (!best || (objective == Objective::minimize ? t.score < best->score : t.score > best->score)) best = &t;
    }
    if (!best) {
        const std::string reason = trials.empty() ? "no trials" : trials.front().error;
        fail(ErrorCode::convergence, fmt::format("every trial failed (first error: {})", reason));
    }
    result.best = *best;
    result.trials = std::move(trials);
    return result;
}

}  // namespace

SearchResult grid_search(const ParamSpace& space, const Evaluate& evaluate, const SearchOptions& options) {
    const std::size_t total = space.grid_size();
    const auto& dims = space.dimensions();
    std::vector<TrialResult> trials(total);
    for (std::size_t t = 0; t < total; ++t) {
        // Mixed-radix decode with the last dimension varying fastest.
        std::size_t rest = t;
        std::vector<std::size_t> digits(dims.size());
        for (std::size_t d = dims.size(); d-- > 0;) {
            digits[d] = rest % dims[d].values.size();
            rest /= dims[d].values.size();
        }
        for (std::size_t d = 0; d < dims.size(); ++d)
            trials[t].params.values.emplace_back(dims[d].name, dims[d].values[digits[d]]);
        trials[t].index = t;
        trials[t].seed = derive_seed(options.seed, t);
    }
    run_trials(trials, evaluate, options.threads);
    return pick_best(std::move(trials), options.objective);
}

SearchResult random_search(const ParamSpace& space, std::size_t n_trials, const Evaluate& evaluate,
                           const SearchOptions& options) {
    if (space.empty()) fail(ErrorCode::invalid_argument, "random search over an empty space");
    if (n_trials < 1) fail(ErrorCode::invalid_argument, "random search needs at least one trial");
    std::vector<TrialResult> trials(n_trials);
    for (std::size_t t = 0; t < n_trials; ++t) {
        trials[t].index = t;
        trials[t].params = sample_assignment(space, options.seed, t);
        trials[t].seed = derive_seed(options.seed, t);
    }
    run_trials(trials, evaluate, options.threads);
    return pick_best(std::move(trials), options.objective);
}

std::string trial_log_csv(const SearchResult& result, bool include_duration) {
    std::string out = "trial";
    const auto& first = result.trials.empty() ? result.best.params : result.trials.front().params;
    for (const auto& [name, value] : first.values) out += "," + name;
    out += ",score,status,seed";
    if (include_duration) out += ",duration_ms";
    out += '\n';
    for (const auto& t : result.trials) {
        out += fmt::format("{}", t.index);
        for (const auto& [name, value] : t.params.values) out += "," + format_param(value);
        out += "," + (t.ok ? format_number(t.score) : std::string("NA"));
        out += t.ok ? ",ok" : ",failed";
        out += fmt::format(",{}", t.seed);
        if (include_duration) out += fmt::format(",{:.3f}", t.duration_ms);
        out += '\n';
    }
    return out;
}

}  // namespace concert
