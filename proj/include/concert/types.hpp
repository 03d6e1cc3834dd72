#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace concert {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Labels = std::vector<int>;

/// City classes are always 0..4.
inline constexpr int kNumClasses = 5;

enum class Task { location, price };

}  // namespace concert
