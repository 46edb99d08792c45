#include "bathyrom/forward.hpp"

#include <algorithm>
#include <cmath>

#include "bathyrom/rng.hpp"

namespace bathyrom {

double column_conveyance(const BathymetryField& bathy, int col, double stage,
                         const ForwardParams& params) {
  double k = 0.0;
  for (int i = 0; i < bathy.geometry.n_across; ++i) {
    const double d = stage - bathy.bed_elevation(i, col);
    if (d > params.min_depth)
      k += std::pow(d, 5.0 / 3.0) / params.manning_n * bathy.geometry.dy;
  }
  return k;
}

namespace {

bool column_wet(const BathymetryField& bathy, int col, double stage, double min_depth) {
  for (int i = 0; i < bathy.geometry.n_across; ++i)
    if (stage - bathy.bed_elevation(i, col) > min_depth) return true;
  return false;
}

}  // namespace

Eigen::VectorXd backwater_profile(const BathymetryField& bathy, const BoundaryConditions& bc,
                                  const ForwardParams& params) {
  bathy.validate();
  bc.validate();
  params.validate();
  const int n_along = bathy.geometry.n_along;
  const int outlet = n_along - 1;
  Eigen::VectorXd surface(n_along);
  surface[outlet] = bc.downstream_surface;
  if (!column_wet(bathy, outlet, surface[outlet], params.min_depth))
    throw InfeasibleBathymetry("backwater: outlet cross-section is dry at the given stage");

  const double q2 = bc.discharge * bc.discharge;
  for (int j = outlet - 1; j >= 0; --j) {
    const double stage_down = surface[j + 1];
    const double k_half = 0.5 * (column_conveyance(bathy, j, stage_down, params) +
                                 column_conveyance(bathy, j + 1, stage_down, params));
    double friction_slope =
        k_half > 0.0 ? q2 / (k_half * k_half) : params.max_backwater_slope;
    friction_slope = std::min(friction_slope, params.max_backwater_slope);
    surface[j] = stage_down + friction_slope * bathy.geometry.dx;
    if (!column_wet(bathy, j, surface[j], params.min_depth))
      throw InfeasibleBathymetry("backwater: dry cross-section at column " + std::to_string(j));
  }
  return surface;
}

Eigen::MatrixXd conveyance_velocity(const BathymetryField& bathy,
                                    const Eigen::VectorXd& surface,
                                    const BoundaryConditions& bc, const ForwardParams& params) {
  const auto& g = bathy.geometry;
  if (surface.size() != g.n_along)
    throw ValidationError("conveyance: surface length does not match geometry");
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(g.n_across, g.n_along);
  for (int j = 0; j < g.n_along; ++j) {
    const double k = column_conveyance(bathy, j, surface[j], params);
    if (!(k > 0.0))
      throw InfeasibleBathymetry("conveyance: zero conveyance at column " + std::to_string(j));
    const double scale = bc.discharge / (k * params.manning_n);
    for (int i = 0; i < g.n_across; ++i) {
      const double d = surface[j] - bathy.bed_elevation(i, j);
      if (d > params.min_depth) u(i, j) = scale * std::pow(d, 2.0 / 3.0);
    }
  }
  return u;
}

Eigen::MatrixXd transverse_velocity(const Eigen::MatrixXd& u, const Eigen::MatrixXd& depth,
                                    const ChannelGeometry& geometry, double min_depth) {
  const int na = geometry.n_across, nl = geometry.n_along;
  if (u.rows() != na || u.cols() != nl || depth.rows() != na || depth.cols() != nl)
    throw ValidationError("transverse: field dimensions do not match geometry");

  const Eigen::MatrixXd unit_flux = u.array() * depth.array();  // u*d
  Eigen::MatrixXd div(na, nl);  // d(u*d)/dx, central inside, one-sided at the ends
  for (int i = 0; i < na; ++i) {
    div(i, 0) = (unit_flux(i, 1) - unit_flux(i, 0)) / geometry.dx;
    div(i, nl - 1) = (unit_flux(i, nl - 1) - unit_flux(i, nl - 2)) / geometry.dx;
    for (int j = 1; j < nl - 1; ++j)
      div(i, j) = (unit_flux(i, j + 1) - unit_flux(i, j - 1)) / (2.0 * geometry.dx);
  }

  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(na, nl);
  for (int j = 0; j < nl; ++j) {
    double lateral_flux = 0.0;  // v*d accumulated from the near bank
    for (int i = 0; i < na; ++i) {
      lateral_flux -= div(i, j) * geometry.dy;
      if (i > 0 && depth(i, j) > min_depth) v(i, j) = lateral_flux / depth(i, j);
    }
  }
  return v;
}

FlowField simulate(const BathymetryField& bathy, const BoundaryConditions& bc,
                   const ForwardParams& params) {
  FlowField flow;
  flow.geometry = bathy.geometry;
  flow.surface = backwater_profile(bathy, bc, params);
  flow.u = conveyance_velocity(bathy, flow.surface, bc, params);
  flow.depth.resize(bathy.geometry.n_across, bathy.geometry.n_along);
  for (int j = 0; j < bathy.geometry.n_along; ++j)
    for (int i = 0; i < bathy.geometry.n_across; ++i)
      flow.depth(i, j) = std::max(flow.surface[j] - bathy.bed_elevation(i, j), 0.0);
  flow.v = transverse_velocity(flow.u, flow.depth, bathy.geometry, params.min_depth);
  return flow;
}

ObservationSet observe(const FlowField& flow, const ObservationMask& mask, double r,
                       std::uint64_t seed, const BoundaryConditions& bc) {
  if (!(r > 0.0)) throw ValidationError("observe: noise level must be positive");
  ObservationSet obs;
  obs.mask = mask;
  obs.values = apply_mask(flow, mask);
  Rng rng(seed);
  for (Eigen::Index i = 0; i < obs.values.size(); ++i) obs.values[i] += r * rng.normal();
  obs.noise_std = Eigen::VectorXd::Constant(obs.values.size(), r);
  obs.bc = bc;
  return obs;
}

}  // namespace bathyrom
