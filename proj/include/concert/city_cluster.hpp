#pragma once

#include "concert/data_model.hpp"
#include "concert/random.hpp"
#include "concert/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace concert {

struct CityFeatures {
    std::string name;
    double income_per_capita = 0.0;
    double population_density = 0.0;
    std::optional<double> population;  // only used when KMeansConfig::include_population
};

struct KMeansConfig {
    std::size_t k = 5;
    std::uint64_t seed = 0;
    std::size_t restarts = 10;
    std::size_t max_iterations = 300;
    bool include_population = false;
    unsigned threads = 0;
};

/// Fitted city classes. Centroids live in z-scored feature space and are
/// ordered by ascending income, so class 0 is the poorest cluster.
struct KMeansModel {
    std::size_t k = 0;
    Matrix centroids;  // k x dims, standardized
    Vector feature_mean;
    Vector feature_stddev;
    double inertia = 0.0;
    std::uint64_t seed = 0;
    std::size_t restarts = 0;
    bool include_population = false;
    std::vector<std::string> feature_names;

    // Fit diagnostics: inertia after each assignment pass of the winning
    // restart, and the final class of every fitted point.
    std::vector<double> inertia_history;
    Labels assignments;
    std::size_t iterations = 0;

    /// Centroids mapped back to raw units (income, density[, population]).
    Matrix raw_centroids() const;
};

KMeansModel kmeans_fit(const std::vector<CityFeatures>& cities, const KMeansConfig& config);

/// Nearest centroid in standardized space; ties go to the lowest class.
int assign_class(const CityFeatures& city, const KMeansModel& model);

/// Lloyd iterations on an already prepared point set. Exposed for testing
/// the clustering core independently of standardization and relabeling.
struct LloydResult {
    Matrix centroids;
    Labels assignments;
    double inertia = 0.0;
    std::vector<double> inertia_history;
    std::size_t iterations = 0;
};

LloydResult lloyd(const Matrix& points, std::size_t k, Rng& rng, std::size_t max_iterations);

std::vector<CityFeatures> cities_from_table(const RawTable& table);
/// Unique (income, density) pairs of a concert table, named by their values.
std::vector<CityFeatures> cities_from_concerts(const RawTable& concerts);

}  // namespace concert
