#ifndef BATHYROM_METRICS_HPP
#define BATHYROM_METRICS_HPP

#include <Eigen/Dense>
#include <cmath>

#include "bathyrom/errors.hpp"

namespace bathyrom {

/// Root-mean-square difference over all entries.
inline double grid_rmse(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ValidationError("grid_rmse: dimension mismatch");
  return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

inline double vector_rmse(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw ValidationError("vector_rmse: dimension mismatch");
  return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

}  // namespace bathyrom

#endif  // BATHYROM_METRICS_HPP
