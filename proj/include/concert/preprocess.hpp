#pragma once

#include "concert/data_model.hpp"
#include "concert/types.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace concert {

/// Columns rewritten as ln(x + offset).
struct LogSpec {
    struct Column {
        std::string name;
        double offset = 0.0;
    };
    std::vector<Column> columns;

    bool contains(std::string_view name) const;
    double offset_of(std::string_view name) const;
};

/// Default log targets for concert data. Offsets are 0 where the fitting data
/// is strictly positive and 1 where zeros occur; columns absent from `x` are skipped.
LogSpec default_log_spec(const FeatureMatrix& x);

/// Throws invalid_argument naming row and column when x + offset <= 0.
FeatureMatrix log_transform(const FeatureMatrix& x, const LogSpec& spec);
double log_value(double value, double offset);

struct ScalerState {
    std::vector<std::string> column_names;
    std::vector<double> min;
    std::vector<double> max;
};

ScalerState fit_minmax(const FeatureMatrix& x);
/// (x - min) / (max - min) without clamping; constant columns map to 0.
/// Columns are matched by name and must all be known to the scaler.
FeatureMatrix apply_minmax(const FeatureMatrix& x, const ScalerState& state);
/// Inverse of apply_minmax for non-constant columns.
FeatureMatrix invert_minmax(const FeatureMatrix& x, const ScalerState& state);

struct PcaState {
    Matrix components;  // k x d, orthonormal rows
    Vector means;       // d
    Vector explained_variance;  // k, non-increasing
    std::vector<std::string> input_columns;
};

/// Top-k eigenvectors of the sample covariance (divisor M - 1). The first
/// nonzero entry of every component is positive.
PcaState fit_pca(const FeatureMatrix& x, std::size_t k);
/// (X - means) * components^T, with columns named pc1..pck.
FeatureMatrix pca_project(const FeatureMatrix& x, const PcaState& state);

struct OversampleReport {
    std::map<int, std::size_t> original_counts;
    std::map<int, std::size_t> final_counts;
    std::vector<std::size_t> duplicated;  // source row of every appended copy
};

struct Oversampled {
    FeatureMatrix x;
    Labels y;
    OversampleReport report;
};

/// Upsamples every present class to the majority count by seeded uniform
/// duplication with replacement. Original rows come first, unchanged.
Oversampled oversample(const FeatureMatrix& x, const Labels& y, std::uint64_t seed);

}  // namespace concert
