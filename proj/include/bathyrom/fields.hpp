#ifndef BATHYROM_FIELDS_HPP
#define BATHYROM_FIELDS_HPP

#include <Eigen/Dense>

#include "bathyrom/errors.hpp"

namespace bathyrom {

/// Structured channel mesh. Rows (index i) run across the channel, columns
/// (index j) along it. dx is the along-channel spacing between columns,
/// dy the across-channel spacing between rows.
struct ChannelGeometry {
  int n_across = 0;
  int n_along = 0;
  double dx = 0.0;
  double dy = 0.0;

  [[nodiscard]] int node_count() const { return n_across * n_along; }

  void validate() const {
    if (n_across < 3 || n_along < 3)
      throw ValidationError("geometry: n_across and n_along must both be >= 3");
    if (!(dx > 0.0) || !(dy > 0.0))
      throw ValidationError("geometry: node spacings must be positive");
  }

  bool operator==(const ChannelGeometry&) const = default;
};

/// Bed elevation grid, meters, positive up relative to the datum.
struct BathymetryField {
  ChannelGeometry geometry;
  Eigen::MatrixXd bed_elevation;  // [n_across x n_along]

  void validate() const {
    geometry.validate();
    if (bed_elevation.rows() != geometry.n_across || bed_elevation.cols() != geometry.n_along)
      throw ValidationError("bathymetry: grid dimensions do not match geometry");
    if (!bed_elevation.allFinite()) throw ValidationError("bathymetry: non-finite entries");
  }
};

/// Depth-averaged velocities (u along-channel, v across-channel), depth,
/// and the one-dimensional water-surface profile.
struct FlowField {
  ChannelGeometry geometry;
  Eigen::MatrixXd u;        // m/s, [n_across x n_along]
  Eigen::MatrixXd v;        // m/s
  Eigen::MatrixXd depth;    // m, >= 0
  Eigen::VectorXd surface;  // m, [n_along]
};

struct BoundaryConditions {
  double discharge = 0.0;           // m^3/s, upstream inflow
  double downstream_surface = 0.0;  // m, stage at the outlet column

  void validate() const {
    if (!(discharge > 0.0)) throw ValidationError("bc: discharge must be positive");
    if (!std::isfinite(downstream_surface))
      throw ValidationError("bc: downstream surface must be finite");
  }
};

/// Row-major flattening shared by every module that views a grid as a
/// vector (node (i, j) lands at i * n_along + j).
inline Eigen::VectorXd flatten(const Eigen::MatrixXd& m) {
  Eigen::VectorXd out(m.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[i * m.cols() + j] = m(i, j);
  return out;
}

inline Eigen::MatrixXd unflatten(const Eigen::VectorXd& x, int rows, int cols) {
  if (x.size() != static_cast<Eigen::Index>(rows) * cols)
    throw ValidationError("unflatten: size does not match target shape");
  Eigen::MatrixXd out(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) out(i, j) = x[i * cols + j];
  return out;
}

}  // namespace bathyrom

#endif  // BATHYROM_FIELDS_HPP
