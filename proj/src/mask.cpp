#include "bathyrom/mask.hpp"

#include <cmath>
#include <cstdint>
#include <set>

#include "bathyrom/container.hpp"
#include "bathyrom/errors.hpp"

namespace bathyrom {

void ObservationMask::validate(const ChannelGeometry& geometry) const {
  check_bounds(geometry);
  std::set<std::pair<int, int>> seen;
  for (const auto& idx : indices)
    if (!seen.insert(idx).second) throw ValidationError("mask: duplicate index");
}

void ObservationMask::check_bounds(const ChannelGeometry& geometry) const {
  if (indices.empty()) throw ValidationError("mask: empty index list");
  if (!includes_u && !includes_v)
    throw ValidationError("mask: at least one velocity component must be included");
  for (const auto& [r, c] : indices)
    if (r < 0 || r >= geometry.n_across || c < 0 || c >= geometry.n_along)
      throw ValidationError("mask: index out of bounds");
}

void ObservationSet::validate(const ChannelGeometry& geometry) const {
  mask.validate(geometry);
  if (static_cast<std::size_t>(values.size()) != mask.value_count())
    throw ValidationError("observations: value count does not match mask");
  if (noise_std.size() != values.size())
    throw ValidationError("observations: noise vector length mismatch");
  if ((noise_std.array() <= 0.0).any())
    throw ValidationError("observations: noise standard deviations must be positive");
  bc.validate();
}

ObservationMask full_mask(const ChannelGeometry& geometry) {
  ObservationMask m;
  m.indices.reserve(static_cast<std::size_t>(geometry.node_count()));
  for (int i = 0; i < geometry.n_across; ++i)
    for (int j = 0; j < geometry.n_along; ++j) m.indices.emplace_back(i, j);
  return m;
}

namespace {

/// Centered arithmetic lattice {start, start + stride, ...} of n points.
std::vector<int> lattice_positions(int extent, int stride, int n) {
  const int start = (extent - 1 - (n - 1) * stride) / 2;
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) out.push_back(start + t * stride);
  return out;
}

int ceil_div(int a, int b) { return (a + b - 1) / b; }

}  // namespace

ObservationMask equispaced_mask(const ChannelGeometry& geometry, int n_points) {
  geometry.validate();
  if (n_points < 1 || n_points > geometry.node_count())
    throw ValidationError("equispaced_mask: n_points out of range");

  const double grid_aspect =
      static_cast<double>(geometry.n_along) / static_cast<double>(geometry.n_across);
  int best_sa = 1, best_sl = 1;
  long best_count_err = -1;
  double best_aspect_err = 0.0;
  for (int sa = 1; sa <= geometry.n_across; ++sa) {
    const int ca = ceil_div(geometry.n_across, sa);
    for (int sl = 1; sl <= geometry.n_along; ++sl) {
      const int cl = ceil_div(geometry.n_along, sl);
      const long count_err = std::labs(static_cast<long>(ca) * cl - n_points);
      const double aspect_err =
          std::abs(static_cast<double>(cl) / static_cast<double>(ca) - grid_aspect);
      if (best_count_err < 0 || count_err < best_count_err ||
          (count_err == best_count_err && aspect_err < best_aspect_err)) {
        best_count_err = count_err;
        best_aspect_err = aspect_err;
        best_sa = sa;
        best_sl = sl;
      }
    }
  }

  const int ca = ceil_div(geometry.n_across, best_sa);
  const int cl = ceil_div(geometry.n_along, best_sl);
  const auto rows = lattice_positions(geometry.n_across, best_sa, ca);
  const auto cols = lattice_positions(geometry.n_along, best_sl, cl);
  ObservationMask m;
  m.indices.reserve(static_cast<std::size_t>(ca) * cl);
  for (int r : rows)
    for (int c : cols) m.indices.emplace_back(r, c);
  return m;
}

Eigen::VectorXd apply_mask(const FlowField& flow, const ObservationMask& mask) {
  mask.check_bounds(flow.geometry);
  Eigen::VectorXd out(static_cast<Eigen::Index>(mask.value_count()));
  Eigen::Index k = 0;
  if (mask.includes_u)
    for (const auto& [r, c] : mask.indices) out[k++] = flow.u(r, c);
  if (mask.includes_v)
    for (const auto& [r, c] : mask.indices) out[k++] = flow.v(r, c);
  return out;
}

void save_observations(const ObservationSet& obs, const ChannelGeometry& geometry,
                       const std::filesystem::path& path) {
  obs.validate(geometry);
  Container c;
  c.put_u32("geometry/dims", {2},
            {static_cast<std::uint32_t>(geometry.n_across),
             static_cast<std::uint32_t>(geometry.n_along)});
  c.put_f64("geometry/spacing", {2}, {geometry.dx, geometry.dy});
  std::vector<std::uint32_t> idx;
  idx.reserve(obs.mask.indices.size() * 2);
  for (const auto& [r, col] : obs.mask.indices) {
    idx.push_back(static_cast<std::uint32_t>(r));
    idx.push_back(static_cast<std::uint32_t>(col));
  }
  c.put_u32("mask/indices", {obs.mask.indices.size(), 2}, idx);
  c.put_u32("mask/components", {2},
            {obs.mask.includes_u ? 1u : 0u, obs.mask.includes_v ? 1u : 0u});
  c.put_vector_f64("obs/values", obs.values);
  c.put_vector_f64("obs/noise_std", obs.noise_std);
  c.put_f64("obs/bc", {2}, {obs.bc.discharge, obs.bc.downstream_surface});
  c.save(path);
}

std::pair<ObservationSet, ChannelGeometry> load_observations(
    const std::filesystem::path& path) {
  const Container c = Container::load(path);
  const auto dims = c.get_u32("geometry/dims");
  const auto spacing = c.get_f64("geometry/spacing");
  if (dims.size() != 2 || spacing.size() != 2)
    throw FormatError("observations: malformed geometry arrays");
  ChannelGeometry geometry{static_cast<int>(dims[0]), static_cast<int>(dims[1]), spacing[0],
                           spacing[1]};
  ObservationSet obs;
  const auto idx = c.get_u32("mask/indices");
  if (idx.size() % 2 != 0) throw FormatError("observations: malformed mask indices");
  for (std::size_t i = 0; i < idx.size(); i += 2)
    obs.mask.indices.emplace_back(static_cast<int>(idx[i]), static_cast<int>(idx[i + 1]));
  const auto comp = c.get_u32("mask/components");
  if (comp.size() != 2) throw FormatError("observations: malformed component flags");
  obs.mask.includes_u = comp[0] != 0;
  obs.mask.includes_v = comp[1] != 0;
  obs.values = c.get_vector("obs/values");
  obs.noise_std = c.get_vector("obs/noise_std");
  const auto bc = c.get_f64("obs/bc");
  if (bc.size() != 2) throw FormatError("observations: malformed bc array");
  obs.bc = BoundaryConditions{bc[0], bc[1]};
  obs.validate(geometry);
  return {std::move(obs), geometry};
}

}  // namespace bathyrom
