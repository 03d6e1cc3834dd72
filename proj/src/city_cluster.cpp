#include "concert/city_cluster.hpp"

#include "concert/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace concert {

namespace {

double squared_distance(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
    return (a.row(i) - b.row(j)).squaredNorm();
}

struct Assignment {
    Labels labels;
    double inertia = 0.0;
};

Assignment assign_all(const Matrix& points, const Matrix& centroids) {
    Assignment out;
    out.labels.resize(static_cast<std::size_t>(points.rows()));
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        int best_j = 0;
        for (Eigen::Index j = 0; j < centroids.rows(); ++j) {
            const double d = squared_distance(points, i, centroids, j);
            if (d < best) {
                best = d;
                best_j = static_cast<int>(j);
            }
        }
        out.labels[static_cast<std::size_t>(i)] = best_j;
        out.inertia += best;
    }
    return out;
}

Matrix seed_plus_plus(const Matrix& points, std::size_t k, Rng& rng) {
    const auto n = static_cast<std::size_t>(points.rows());
    Matrix centroids(static_cast<Eigen::Index>(k), points.cols());
    centroids.row(0) = points.row(static_cast<Eigen::Index>(uniform_index(rng, n)));
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], squared_distance(points, static_cast<Eigen::Index>(i), centroids,
                                                     static_cast<Eigen::Index>(c - 1)));
            total += d2[i];
        }
        std::size_t pick = n;
        if (total > 0.0) {
            double target = uniform01(rng) * total;
            for (std::size_t i = 0; i < n; ++i) {
                if (d2[i] <= 0.0) continue;
                target -= d2[i];
                pick = i;
                if (target < 0.0) break;
            }
        }
        if (pick == n) fail(ErrorCode::invalid_argument, "not enough distinct points for k-means seeding");
        centroids.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(pick));
    }
    return centroids;
}

// Moves the point farthest from its centroid (taken from a cluster with more
// than one member) into each empty cluster.
void reseed_empty(const Matrix& points, Matrix& centroids, Labels& labels) {
    const auto k = static_cast<std::size_t>(centroids.rows());
    std::vector<std::size_t> sizes(k, 0);
    for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
    for (std::size_t j = 0; j < k; ++j) {
        if (sizes[j] > 0) continue;
        double worst = -1.0;
        std::size_t worst_i = 0;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            const auto l = static_cast<std::size_t>(labels[i]);
            if (sizes[l] < 2) continue;
            const double d = squared_distance(points, static_cast<Eigen::Index>(i), centroids,
                                              static_cast<Eigen::Index>(l));
            if (d > worst) {
                worst = d;
                worst_i = i;
            }
        }
        if (worst < 0.0) continue;
        --sizes[static_cast<std::size_t>(labels[worst_i])];
        labels[worst_i] = static_cast<int>(j);
        sizes[j] = 1;
        centroids.row(static_cast<Eigen::Index>(j)) = points.row(static_cast<Eigen::Index>(worst_i));
    }
}

void update_means(const Matrix& points, const Labels& labels, Matrix& centroids) {
    const auto k = centroids.rows();
    Matrix sums = Matrix::Zero(k, points.cols());
    std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        sums.row(labels[i]) += points.row(static_cast<Eigen::Index>(i));
        ++sizes[static_cast<std::size_t>(labels[i])];
    }
    for (Eigen::Index j = 0; j < k; ++j)
        if (sizes[static_cast<std::size_t>(j)] > 0)
            centroids.row(j) = sums.row(j) / static_cast<double>(sizes[static_cast<std::size_t>(j)]);
}

std::size_t count_distinct(const Matrix& points) {
    std::set<std::vector<double>> seen;
    for (Eigen::Index i = 0; i < points.rows(); ++i)
        seen.emplace(points.row(i).data(), points.row(i).data() + points.cols());
    return seen.size();
}

}  // namespace

LloydResult lloyd(const Matrix& points, std::size_t k, Rng& rng, std::size_t max_iterations) {
    LloydResult r;
    r.centroids = seed_plus_plus(points, k, rng);
    Assignment a = assign_all(points, r.centroids);
    r.inertia_history.push_back(a.inertia);
    Labels labels = std::move(a.labels);

    for (r.iterations = 1; r.iterations <= max_iterations; ++r.iterations) {
        reseed_empty(points, r.centroids, labels);
        update_means(points, labels, r.centroids);
        Assignment next = assign_all(points, r.centroids);
        r.inertia_history.push_back(next.inertia);
        const bool converged = next.labels == labels;
        labels = std::move(next.labels);
        if (converged) break;
    }
    r.iterations = std::min(r.iterations, max_iterations);
    r.assignments = std::move(labels);
    r.inertia = r.inertia_history.back();
    return r;
}

Matrix KMeansModel::raw_centroids() const {
    Matrix out = centroids;
    for (Eigen::Index j = 0; j < out.cols(); ++j)
        out.col(j) = out.col(j).array() * feature_stddev(j) + feature_mean(j);
    return out;
}

namespace {

std::vector<double> city_vector(const CityFeatures& c, bool include_population) {
    std::vector<double> v{c.income_per_capita, c.population_density};
    if (include_population) {
        if (!c.population)
            fail(ErrorCode::missing_value, fmt::format("city {} has no population but clustering uses it", c.name));
        v.push_back(*c.population);
    }
    for (double x : v)
        if (!std::isfinite(x) || x < 0.0)
            fail(ErrorCode::invalid_argument, fmt::format("city {} has invalid feature value {}", c.name, x));
    return v;
}

}  // namespace

KMeansModel kmeans_fit(const std::vector<CityFeatures>& cities, const KMeansConfig& config) {
    if (config.k < 1) fail(ErrorCode::invalid_argument, "k must be at least 1");
    if (config.restarts < 1) fail(ErrorCode::invalid_argument, "restarts must be at least 1");
    const std::size_t dims = config.include_population ? 3 : 2;
    const auto n = static_cast<Eigen::Index>(cities.size());

    Matrix raw(n, static_cast<Eigen::Index>(dims));
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto v = city_vector(cities[static_cast<std::size_t>(i)], config.include_population);
        for (std::size_t j = 0; j < dims; ++j) raw(i, static_cast<Eigen::Index>(j)) = v[j];
    }
    if (count_distinct(raw) < config.k)
        fail(ErrorCode::invalid_argument,
             fmt::format("k-means needs at least {} distinct cities, got {}", config.k, count_distinct(raw)));

    KMeansModel model;
    model.k = config.k;
    model.seed = config.seed;
    model.restarts = config.restarts;
    model.include_population = config.include_population;
    model.feature_names = {"income_per_capita", "population_density"};
    if (config.include_population) model.feature_names.emplace_back("population");

    model.feature_mean = raw.colwise().mean().transpose();
    model.feature_stddev.resize(static_cast<Eigen::Index>(dims));
    for (Eigen::Index j = 0; j < raw.cols(); ++j) {
        const double var = (raw.col(j).array() - model.feature_mean(j)).square().mean();
        model.feature_stddev(j) = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    Matrix points = raw;
    for (Eigen::Index j = 0; j < points.cols(); ++j)
        points.col(j) = (points.col(j).array() - model.feature_mean(j)) / model.feature_stddev(j);

    std::vector<LloydResult> runs(config.restarts);
    parallel_for(
        config.restarts,
        [&](std::size_t r) {
            Rng rng = make_rng(config.seed, r);
            runs[r] = lloyd(points, config.k, rng, config.max_iterations);
        },
        config.threads);
    std::size_t best = 0;
    for (std::size_t r = 1; r < runs.size(); ++r)
        if (runs[r].inertia < runs[best].inertia) best = r;
    LloydResult& win = runs[best];

    // Relabel by ascending income, then density.
    std::vector<std::size_t> order(config.k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto ra = win.centroids.row(static_cast<Eigen::Index>(a));
        const auto rb = win.centroids.row(static_cast<Eigen::Index>(b));
        for (Eigen::Index j = 0; j < ra.size(); ++j)
            if (ra(j) != rb(j)) return ra(j) < rb(j);
        return a < b;
    });
    std::vector<int> new_label(config.k);
    model.centroids.resize(static_cast<Eigen::Index>(config.k), points.cols());
    for (std::size_t pos = 0; pos < config.k; ++pos) {
        model.centroids.row(static_cast<Eigen::Index>(pos)) = win.centroids.row(static_cast<Eigen::Index>(order[pos]));
        new_label[order[pos]] = static_cast<int>(pos);
    }
    model.assignments.reserve(win.assignments.size());
    for (int l : win.assignments) model.assignments.push_back(new_label[static_cast<std::size_t>(l)]);
    model.inertia = win.inertia;
    model.inertia_history = std::move(win.inertia_history);
    model.iterations = win.iterations;
    return model;
}

int assign_class(const CityFeatures& city, const KMeansModel& model) {
    const auto v = city_vector(city, model.include_population);
    int best_j = 0;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < model.centroids.rows(); ++j) {
        double d = 0.0;
        for (Eigen::Index f = 0; f < model.centroids.cols(); ++f) {
            const double z = (v[static_cast<std::size_t>(f)] - model.feature_mean(f)) / model.feature_stddev(f);
            d += (z - model.centroids(j, f)) * (z - model.centroids(j, f));
        }
        if (d < best) {
            best = d;
            best_j = static_cast<int>(j);
        }
    }
    return best_j;
}

std::vector<CityFeatures> cities_from_table(const RawTable& table) {
    const auto name_col = table.column_index("city");
    const Vector income = numeric_column(table, "income_per_capita");
    const Vector density = numeric_column(table, "population_density");
    const auto pop_col = table.find_column("population");
    std::vector<CityFeatures> out;
    for (std::size_t r = 0; r < table.row_count(); ++r) {
        CityFeatures c;
        c.name = table.rows[r][name_col].value_or("");
        c.income_per_capita = income(static_cast<Eigen::Index>(r));
        c.population_density = density(static_cast<Eigen::Index>(r));
        if (pop_col && table.rows[r][*pop_col]) c.population = parse_number(*table.rows[r][*pop_col]);
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<CityFeatures> cities_from_concerts(const RawTable& concerts) {
    const Vector income = numeric_column(concerts, schema::kIncome);
    const Vector density = numeric_column(concerts, schema::kDensity);
    const Vector population = numeric_column(concerts, schema::kPopulation);
    std::set<std::tuple<double, double, double>> unique;
    for (Eigen::Index i = 0; i < income.size(); ++i) unique.emplace(income(i), density(i), population(i));
    std::vector<CityFeatures> out;
    for (const auto& [inc, den, pop] : unique)
        out.push_back({fmt::format("{}/{}", inc, den), inc, den, pop});
    return out;
}

}  // namespace concert
