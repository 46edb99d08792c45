#ifndef BATHYROM_MASK_HPP
#define BATHYROM_MASK_HPP

#include <Eigen/Dense>
#include <filesystem>
#include <utility>
#include <vector>

#include "bathyrom/fields.hpp"

namespace bathyrom {

/// Node positions where velocities are observed, in sampling order.
struct ObservationMask {
  std::vector<std::pair<int, int>> indices;  // (row, col)
  bool includes_u = true;
  bool includes_v = true;

  [[nodiscard]] std::size_t point_count() const { return indices.size(); }
  [[nodiscard]] std::size_t value_count() const {
    return indices.size() * ((includes_u ? 1u : 0u) + (includes_v ? 1u : 0u));
  }
  /// Full invariants: non-empty, in-bounds, unique.
  void validate(const ChannelGeometry& geometry) const;
  /// Mechanical selection only needs bounds; duplicated rows are allowed.
  void check_bounds(const ChannelGeometry& geometry) const;
};

/// Masked, noise-corrupted velocity samples with their diagonal noise
/// levels and the boundary conditions the flow was run under. Value
/// ordering is all u samples then all v samples, each in mask order.
struct ObservationSet {
  ObservationMask mask;
  Eigen::VectorXd values;
  Eigen::VectorXd noise_std;  // per entry, m/s
  BoundaryConditions bc;

  void validate(const ChannelGeometry& geometry) const;
};

/// Full-grid mask in row-major order.
ObservationMask full_mask(const ChannelGeometry& geometry);

/// Deterministic near-uniform lattice of about n_points nodes. Searches
/// every integer stride pair (sa, sl), picking the lattice whose node
/// count is closest to n_points; ties prefer the lattice aspect closest
/// to the grid's, then smaller sa, then smaller sl. The lattice is
/// centered in the grid.
ObservationMask equispaced_mask(const ChannelGeometry& geometry, int n_points);

/// Concatenation [u at indices; v at indices] in mask order.
Eigen::VectorXd apply_mask(const FlowField& flow, const ObservationMask& mask);

void save_observations(const ObservationSet& obs, const ChannelGeometry& geometry,
                       const std::filesystem::path& path);
std::pair<ObservationSet, ChannelGeometry> load_observations(const std::filesystem::path& path);

}  // namespace bathyrom

#endif  // BATHYROM_MASK_HPP
