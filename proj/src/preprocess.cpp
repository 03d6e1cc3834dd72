#include "concert/preprocess.hpp"

#include "concert/error.hpp"
#include "concert/random.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace concert {

bool LogSpec::contains(std::string_view name) const {
    return std::any_of(columns.begin(), columns.end(), [&](const Column& c) { return c.name == name; });
}

double LogSpec::offset_of(std::string_view name) const {
    for (const auto& c : columns)
        if (c.name == name) return c.offset;
    fail(ErrorCode::invalid_argument, fmt::format("column {} is not log-transformed", name));
}

LogSpec default_log_spec(const FeatureMatrix& x) {
    static const std::vector<std::string_view> targets{schema::kPrice, schema::kPlaycount, schema::kPopulation,
                                                       schema::kGenresNum, schema::kVenueCount};
    LogSpec spec;
    for (auto name : targets) {
        auto col = x.find_column(name);
        if (!col) continue;
        const double min = x.rows() ? x.values.col(static_cast<Eigen::Index>(*col)).minCoeff() : 1.0;
        spec.columns.push_back({std::string(name), min > 0.0 ? 0.0 : 1.0});
    }
    return spec;
}

double log_value(double value, double offset) {
    const double arg = value + offset;
    if (!(arg > 0.0)) fail(ErrorCode::invalid_argument, fmt::format("log of nonpositive value {}", arg));
    return std::log(arg);
}

FeatureMatrix log_transform(const FeatureMatrix& x, const LogSpec& spec) {
    FeatureMatrix out = x;
    for (const auto& column : spec.columns) {
        const auto j = static_cast<Eigen::Index>(x.column_index(column.name));
        for (Eigen::Index r = 0; r < out.values.rows(); ++r) {
            const double arg = out.values(r, j) + column.offset;
            if (!(arg > 0.0))
                fail(ErrorCode::invalid_argument,
                     fmt::format("log transform: row {} column {} has nonpositive argument {}", r, column.name, arg));
            out.values(r, j) = std::log(arg);
        }
    }
    return out;
}

ScalerState fit_minmax(const FeatureMatrix& x) {
    if (x.rows() == 0) fail(ErrorCode::invalid_argument, "fit_minmax needs at least one row");
    ScalerState s;
    s.column_names = x.column_names;
    for (Eigen::Index j = 0; j < x.values.cols(); ++j) {
        s.min.push_back(x.values.col(j).minCoeff());
        s.max.push_back(x.values.col(j).maxCoeff());
    }
    return s;
}

namespace {

std::vector<std::size_t> scaler_columns(const FeatureMatrix& x, const ScalerState& state) {
    std::vector<std::size_t> map;
    for (const auto& name : x.column_names) {
        auto it = std::find(state.column_names.begin(), state.column_names.end(), name);
        if (it == state.column_names.end())
            fail(ErrorCode::schema_mismatch, fmt::format("scaler has no column {}", name));
        map.push_back(static_cast<std::size_t>(it - state.column_names.begin()));
    }
    return map;
}

}  // namespace

FeatureMatrix apply_minmax(const FeatureMatrix& x, const ScalerState& state) {
    const auto map = scaler_columns(x, state);
    FeatureMatrix out = x;
    for (Eigen::Index j = 0; j < out.values.cols(); ++j) {
        const double lo = state.min[map[static_cast<std::size_t>(j)]];
        const double hi = state.max[map[static_cast<std::size_t>(j)]];
        if (hi == lo) {
            out.values.col(j).setZero();
            continue;
        }
        out.values.col(j) = (out.values.col(j).array() - lo) / (hi - lo);
    }
    return out;
}

FeatureMatrix invert_minmax(const FeatureMatrix& x, const ScalerState& state) {
    const auto map = scaler_columns(x, state);
    FeatureMatrix out = x;
    for (Eigen::Index j = 0; j < out.values.cols(); ++j) {
        const double lo = state.min[map[static_cast<std::size_t>(j)]];
        const double hi = state.max[map[static_cast<std::size_t>(j)]];
        out.values.col(j) = out.values.col(j).array() * (hi - lo) + lo;
    }
    return out;
}

PcaState fit_pca(const FeatureMatrix& x, std::size_t k) {
    const auto d = x.cols();
    if (k < 1 || k > d) fail(ErrorCode::invalid_argument, fmt::format("PCA needs 1 <= k <= {}, got {}", d, k));
    if (x.rows() < 2) fail(ErrorCode::invalid_argument, "PCA needs at least 2 rows");

    PcaState s;
    s.input_columns = x.column_names;
    s.means = x.values.colwise().mean().transpose();
    const Matrix centered = x.values.rowwise() - s.means.transpose();
    const Eigen::MatrixXd cov =
        (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) fail(ErrorCode::convergence, "covariance eigendecomposition failed");

    const auto kk = static_cast<Eigen::Index>(k);
    const auto dd = static_cast<Eigen::Index>(d);
    s.components.resize(kk, dd);
    s.explained_variance.resize(kk);
    for (Eigen::Index i = 0; i < kk; ++i) {
        // Eigen sorts eigenvalues ascending.
        const Eigen::Index src = dd - 1 - i;
        Eigen::VectorXd v = solver.eigenvectors().col(src);
        for (Eigen::Index j = 0; j < dd; ++j) {
            if (std::abs(v(j)) > 1e-12) {
                if (v(j) < 0) v = -v;
                break;
            }
        }
        s.components.row(i) = v.transpose();
        s.explained_variance(i) = std::max(0.0, solver.eigenvalues()(src));
    }
    return s;
}

FeatureMatrix pca_project(const FeatureMatrix& x, const PcaState& state) {
    if (x.column_names != state.input_columns)
        fail(ErrorCode::schema_mismatch, "PCA input columns differ from the fitted columns");
    FeatureMatrix out;
    out.values = (x.values.rowwise() - state.means.transpose()) * state.components.transpose();
    for (Eigen::Index i = 0; i < state.components.rows(); ++i) {
        out.column_names.push_back(fmt::format("pc{}", i + 1));
        out.column_kinds.push_back(ColumnKind::continuous);
    }
    return out;
}

Oversampled oversample(const FeatureMatrix& x, const Labels& y, std::uint64_t seed) {
    if (y.empty()) fail(ErrorCode::invalid_argument, "oversample needs at least one row");
    if (x.rows() != y.size())
        fail(ErrorCode::invalid_argument, fmt::format("X has {} rows but y has {} labels", x.rows(), y.size()));

    std::map<int, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < y.size(); ++i) members[y[i]].push_back(i);

    Oversampled out;
    std::size_t majority = 0;
    for (const auto& [label, rows] : members) {
        out.report.original_counts[label] = rows.size();
        majority = std::max(majority, rows.size());
    }

    Rng rng = make_rng(seed, 0x0ce5);
    std::vector<std::size_t> rows(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) rows[i] = i;
    for (const auto& [label, idx] : members) {
        for (std::size_t n = idx.size(); n < majority; ++n) {
            const auto src = idx[uniform_index(rng, idx.size())];
            out.report.duplicated.push_back(src);
            rows.push_back(src);
        }
        out.report.final_counts[label] = majority;
    }
    out.x = x.take_rows(rows);
    out.y = take(y, rows);
    return out;
}

}  // namespace concert
