#ifndef BATHYROM_PRIOR_HPP
#define BATHYROM_PRIOR_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "bathyrom/fields.hpp"

namespace bathyrom {

/// Anisotropic squared-exponential covariance
///   C(p, q) = sigma^2 * exp(-dx^2/len_along^2 - dy^2/len_across^2)
/// with a small diagonal jitter added on top.
struct KernelSpec {
  double sigma = 1.2;        // m, marginal standard deviation
  double len_along = 260.0;  // m
  double len_across = 28.0;  // m
  double nugget = 1e-8;      // m^2

  void validate() const {
    if (!(sigma > 0.0)) throw ValidationError("kernel: sigma must be positive");
    if (!(len_along > 0.0) || !(len_across > 0.0))
      throw ValidationError("kernel: correlation lengths must be positive");
    if (nugget < 0.0) throw ValidationError("kernel: nugget must be non-negative");
  }
};

/// Parabolic cross-section with its minimum on the centerline, plus a
/// linear along-channel trend.
struct ParabolicMeanSpec {
  double thalweg_elevation = 0.0;  // m
  double bank_rise = 3.0;          // m, thalweg to bank
  double along_trend = 0.0003;     // dimensionless bed slope

  void validate() const {
    if (bank_rise < 0.0) throw ValidationError("mean: bank_rise must be non-negative");
  }
};

/// Flat-bottom trapezoidal cross-section: level bed across the middle
/// flat_fraction of the channel, linear rise to the banks.
struct TrapezoidMeanSpec {
  double thalweg_elevation = 0.0;
  double bank_rise = 3.0;
  double flat_fraction = 0.5;  // of the channel width
  double along_trend = 0.0003;

  void validate() const {
    if (bank_rise < 0.0) throw ValidationError("mean: bank_rise must be non-negative");
    if (!(flat_fraction >= 0.0) || !(flat_fraction < 1.0))
      throw ValidationError("mean: flat_fraction must lie in [0, 1)");
  }
};

/// Truncated eigen-factorization of a field covariance: mean vector plus
/// the leading (eigenvalue, eigenvector) pairs, eigenvalues descending and
/// columns orthonormal.
struct FieldBasis {
  ChannelGeometry geometry;
  Eigen::VectorXd eigenvalues;   // [n_modes], descending, >= 0
  Eigen::MatrixXd eigenvectors;  // [m x n_modes]
  Eigen::VectorXd mean;          // [m], flattened row-major
  double captured_variance = 0.0;  // fraction of total kernel variance kept
};

BathymetryField parabolic_mean(const ChannelGeometry& geometry, const ParabolicMeanSpec& spec);
BathymetryField trapezoid_mean(const ChannelGeometry& geometry, const TrapezoidMeanSpec& spec);

/// Dense covariance matrix of the kernel over the grid (nugget included).
/// Quadratic in the node count; used for small grids and as the reference
/// the factorized path is tested against.
Eigen::MatrixXd dense_covariance(const ChannelGeometry& geometry, const KernelSpec& kernel);

/// Leading n_modes eigenpairs of the kernel covariance. Exploits the
/// kernel's separability: eigenpairs of the two 1-d factor kernels are
/// combined as Kronecker products, so cost scales with n_across^3 +
/// n_along^3 rather than (n_across*n_along)^3.
FieldBasis build_field_basis(const ChannelGeometry& geometry, const KernelSpec& kernel,
                             int n_modes,
                             const Eigen::VectorXd& mean = Eigen::VectorXd());

/// mean + sum_k sqrt(lambda_k) xi_k phi_k with xi standard normal drawn
/// from the deterministic generator keyed by seed. kZeroNoiseSeed forces
/// xi = 0 and returns the mean exactly.
BathymetryField sample_bathymetry(const FieldBasis& basis, std::uint64_t seed);

struct BcRanges {
  double discharge_min = 60.0;   // m^3/s
  double discharge_max = 140.0;  // m^3/s
  double surface_min = 2.0;      // m
  double surface_max = 3.0;      // m

  void validate() const {
    if (!(discharge_min > 0.0) || discharge_min > discharge_max)
      throw ValidationError("bc ranges: need 0 < discharge_min <= discharge_max");
    if (surface_min > surface_max)
      throw ValidationError("bc ranges: need surface_min <= surface_max");
  }
};

/// Independent uniform draws over the configured ranges, deterministic
/// per seed.
BoundaryConditions sample_bc(const BcRanges& ranges, std::uint64_t seed);

/// Which mean family a prior uses; the kernel form is shared.
enum class MeanFamily { kParabolic, kTrapezoid };

struct PriorSpec {
  MeanFamily family = MeanFamily::kParabolic;
  ParabolicMeanSpec parabolic;
  TrapezoidMeanSpec trapezoid;
  KernelSpec kernel;
  int n_modes = 200;

  [[nodiscard]] std::string family_name() const {
    return family == MeanFamily::kParabolic ? "parabolic" : "trapezoid";
  }
};

BathymetryField prior_mean(const ChannelGeometry& geometry, const PriorSpec& spec);
FieldBasis build_prior_basis(const ChannelGeometry& geometry, const PriorSpec& spec);

}  // namespace bathyrom

#endif  // BATHYROM_PRIOR_HPP
