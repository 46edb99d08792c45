#include "bathyrom/prior.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bathyrom/rng.hpp"

namespace bathyrom {
namespace {

/// 1-d squared-exponential correlation matrix for n points at spacing h.
Eigen::MatrixXd factor_correlation(int n, double h, double len) {
  Eigen::MatrixXd c(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      const double d = (a - b) * h;
      c(a, b) = std::exp(-d * d / (len * len));
    }
  return c;
}

}  // namespace

BathymetryField parabolic_mean(const ChannelGeometry& geometry,
                               const ParabolicMeanSpec& spec) {
  geometry.validate();
  spec.validate();
  Eigen::MatrixXd bed(geometry.n_across, geometry.n_along);
  for (int i = 0; i < geometry.n_across; ++i) {
    const double t = 2.0 * i / (geometry.n_across - 1) - 1.0;  // -1 at bank, 0 centerline
    const double across = spec.bank_rise * t * t;
    for (int j = 0; j < geometry.n_along; ++j)
      bed(i, j) = spec.thalweg_elevation + across + spec.along_trend * (j * geometry.dx);
  }
  return BathymetryField{geometry, std::move(bed)};
}

BathymetryField trapezoid_mean(const ChannelGeometry& geometry,
                               const TrapezoidMeanSpec& spec) {
  geometry.validate();
  spec.validate();
  Eigen::MatrixXd bed(geometry.n_across, geometry.n_along);
  for (int i = 0; i < geometry.n_across; ++i) {
    const double t = std::abs(2.0 * i / (geometry.n_across - 1) - 1.0);
    const double rise =
        t <= spec.flat_fraction
            ? 0.0
            : spec.bank_rise * (t - spec.flat_fraction) / (1.0 - spec.flat_fraction);
    for (int j = 0; j < geometry.n_along; ++j)
      bed(i, j) = spec.thalweg_elevation + rise + spec.along_trend * (j * geometry.dx);
  }
  return BathymetryField{geometry, std::move(bed)};
}

Eigen::MatrixXd dense_covariance(const ChannelGeometry& geometry, const KernelSpec& kernel) {
  geometry.validate();
  kernel.validate();
  const int m = geometry.node_count();
  Eigen::MatrixXd c(m, m);
  const double s2 = kernel.sigma * kernel.sigma;
  for (int p = 0; p < m; ++p) {
    const int ip = p / geometry.n_along, jp = p % geometry.n_along;
    for (int q = 0; q <= p; ++q) {
      const int iq = q / geometry.n_along, jq = q % geometry.n_along;
      const double ddx = (jp - jq) * geometry.dx;
      const double ddy = (ip - iq) * geometry.dy;
      const double value =
          s2 * std::exp(-ddx * ddx / (kernel.len_along * kernel.len_along) -
                        ddy * ddy / (kernel.len_across * kernel.len_across));
      c(p, q) = value;
      c(q, p) = value;
    }
  }
  c.diagonal().array() += kernel.nugget;
  return c;
}

FieldBasis build_field_basis(const ChannelGeometry& geometry, const KernelSpec& kernel,
                             int n_modes, const Eigen::VectorXd& mean) {
  geometry.validate();
  kernel.validate();
  const int m = geometry.node_count();
  if (n_modes < 1 || n_modes > m)
    throw ValidationError("field basis: n_modes out of range");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solve_across(
      factor_correlation(geometry.n_across, geometry.dy, kernel.len_across));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solve_along(
      factor_correlation(geometry.n_along, geometry.dx, kernel.len_along));
  if (solve_across.info() != Eigen::Success || solve_along.info() != Eigen::Success)
    throw NumericsError("field basis: factor eigen-decomposition failed");

  const double s2 = kernel.sigma * kernel.sigma;
  struct Pair {
    double value;
    int ia, ja;
  };
  std::vector<Pair> pairs;
  pairs.reserve(static_cast<std::size_t>(m));
  for (int ia = 0; ia < geometry.n_across; ++ia)
    for (int ja = 0; ja < geometry.n_along; ++ja)
      pairs.push_back(
          {s2 * solve_across.eigenvalues()[ia] * solve_along.eigenvalues()[ja] + kernel.nugget,
           ia, ja});
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.value != b.value) return a.value > b.value;
    if (a.ia != b.ia) return a.ia < b.ia;
    return a.ja < b.ja;
  });

  FieldBasis basis;
  basis.geometry = geometry;
  basis.eigenvalues.resize(n_modes);
  basis.eigenvectors.resize(m, n_modes);
  for (int k = 0; k < n_modes; ++k) {
    const auto& p = pairs[static_cast<std::size_t>(k)];
    if (p.value < -1e-10)
      throw NumericsError("field basis: covariance not positive semidefinite; raise the nugget");
    basis.eigenvalues[k] = std::max(p.value, 0.0);
    // Kronecker product of the factor eigenvectors, row-major flattening.
    for (int i = 0; i < geometry.n_across; ++i)
      for (int j = 0; j < geometry.n_along; ++j)
        basis.eigenvectors(i * geometry.n_along + j, k) =
            solve_across.eigenvectors()(i, p.ia) * solve_along.eigenvectors()(j, p.ja);
  }
  const double total = static_cast<double>(m) * (s2 + kernel.nugget);
  basis.captured_variance = basis.eigenvalues.sum() / total;
  basis.mean = mean.size() == 0 ? Eigen::VectorXd::Zero(m) : mean;
  if (basis.mean.size() != m)
    throw ValidationError("field basis: mean length does not match geometry");
  return basis;
}

BathymetryField sample_bathymetry(const FieldBasis& basis, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::VectorXd xi(basis.eigenvalues.size());
  for (Eigen::Index k = 0; k < xi.size(); ++k) xi[k] = rng.normal();
  const Eigen::VectorXd coeff = basis.eigenvalues.array().sqrt() * xi.array();
  const Eigen::VectorXd flat = basis.mean + basis.eigenvectors * coeff;
  return BathymetryField{basis.geometry,
                         unflatten(flat, basis.geometry.n_across, basis.geometry.n_along)};
}

BoundaryConditions sample_bc(const BcRanges& ranges, std::uint64_t seed) {
  ranges.validate();
  Rng rng(seed);
  BoundaryConditions bc;
  bc.discharge = rng.uniform(ranges.discharge_min, ranges.discharge_max);
  bc.downstream_surface = rng.uniform(ranges.surface_min, ranges.surface_max);
  return bc;
}

BathymetryField prior_mean(const ChannelGeometry& geometry, const PriorSpec& spec) {
  return spec.family == MeanFamily::kParabolic ? parabolic_mean(geometry, spec.parabolic)
                                               : trapezoid_mean(geometry, spec.trapezoid);
}

FieldBasis build_prior_basis(const ChannelGeometry& geometry, const PriorSpec& spec) {
  const auto mean = prior_mean(geometry, spec);
  return build_field_basis(geometry, spec.kernel, spec.n_modes, flatten(mean.bed_elevation));
}

}  // namespace bathyrom
