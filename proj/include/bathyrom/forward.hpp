#ifndef BATHYROM_FORWARD_HPP
#define BATHYROM_FORWARD_HPP

#include <cstdint>

#include "bathyrom/fields.hpp"
#include "bathyrom/mask.hpp"

namespace bathyrom {

struct ForwardParams {
  double manning_n = 0.03;           // s * m^(-1/3)
  double min_depth = 0.01;           // m, wetting threshold
  double max_backwater_slope = 0.05; // cap on friction slope per step

  void validate() const {
    if (!(manning_n > 0.0)) throw ValidationError("forward: manning_n must be positive");
    if (min_depth < 0.0) throw ValidationError("forward: min_depth must be non-negative");
    if (!(max_backwater_slope > 0.0))
      throw ValidationError("forward: max_backwater_slope must be positive");
  }
};

/// Steady gradually-varied water-surface profile, marched upstream from
/// the downstream stage. Friction slope at each half step uses the mean
/// conveyance of the two bounding cross-sections evaluated at the known
/// downstream stage, clamped at max_backwater_slope. Throws
/// InfeasibleBathymetry when any cross-section stays dry.
Eigen::VectorXd backwater_profile(const BathymetryField& bathy, const BoundaryConditions& bc,
                                  const ForwardParams& params);

/// Manning conveyance of one column at the given stage:
/// K = sum_i (1/n) d_i^(5/3) dy over nodes with d > min_depth.
double column_conveyance(const BathymetryField& bathy, int col, double stage,
                         const ForwardParams& params);

/// Conveyance-distributed along-channel velocity:
/// u_ij = (Q / K_j) (1/n) d_ij^(2/3) on wet nodes, zero elsewhere,
/// which carries exactly Q through every column.
Eigen::MatrixXd conveyance_velocity(const BathymetryField& bathy,
                                    const Eigen::VectorXd& surface,
                                    const BoundaryConditions& bc, const ForwardParams& params);

/// Across-channel velocity from depth-integrated continuity: the lateral
/// unit flux v*d accumulates -d(u*d)/dx from the near bank (central
/// differences along-channel, one-sided at the ends). Dry nodes and the
/// near-bank row carry v = 0.
Eigen::MatrixXd transverse_velocity(const Eigen::MatrixXd& u, const Eigen::MatrixXd& depth,
                                    const ChannelGeometry& geometry, double min_depth);

/// Full noise-free forward map (bathymetry, BCs) -> flow field.
FlowField simulate(const BathymetryField& bathy, const BoundaryConditions& bc,
                   const ForwardParams& params);

/// Masked velocities plus independent Gaussian noise of standard
/// deviation r on every entry, deterministic per seed. bc is carried
/// through so the observation set is self-contained for inversion.
ObservationSet observe(const FlowField& flow, const ObservationMask& mask, double r,
                       std::uint64_t seed, const BoundaryConditions& bc);

}  // namespace bathyrom

#endif  // BATHYROM_FORWARD_HPP
