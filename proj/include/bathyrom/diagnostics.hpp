#ifndef BATHYROM_DIAGNOSTICS_HPP
#define BATHYROM_DIAGNOSTICS_HPP

#include <functional>
#include <string>
#include <vector>

#include "bathyrom/dataset.hpp"
#include "bathyrom/inversion.hpp"
#include "bathyrom/pipeline.hpp"
#include "bathyrom/rom_sve.hpp"

namespace bathyrom {

/// Mean and truncated covariance eigenpairs of a training distribution,
/// with a nugget standing in for the discarded tail.
struct TrainStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd eigenvalues;   // descending, >= 0
  Eigen::MatrixXd eigenvectors;  // [m x n_kept]
  double nugget = 1e-6;

  [[nodiscard]] int dim() const { return static_cast<int>(mean.size()); }
};

/// Sample mean and leading covariance eigenpairs of row-wise samples
/// [N x m], truncated to max_modes.
TrainStats compute_train_stats(const Eigen::MatrixXd& samples, int max_modes = 100,
                               double nugget = 1e-6);

/// Normalized Mahalanobis distance sqrt((x-mu)^T Sigma^-1 (x-mu) / m)
/// with Sigma^-1 applied through the truncated factorization plus nugget.
double mahalanobis(const Eigen::VectorXd& x, const TrainStats& stats);

/// Descending singular values of the finite-difference Hessian of an
/// arbitrary scalar loss, built from central second differences at step h.
Eigen::VectorXd hessian_spectrum(const std::function<double(const Eigen::VectorXd&)>& loss,
                                 const Eigen::VectorXd& z, double h);

enum class LossTerm { kU, kV, kS };

/// Hessian spectrum of one reconstruction term of the surrogate at z: the
/// mean-square difference between the selected head at a probe point and
/// its value at z.
Eigen::VectorXd model_hessian_spectrum(const Rom& model, LossTerm term,
                                       const Eigen::VectorXd& z, const BoundaryConditions& bc,
                                       double h);

struct LatentSweepEntry {
  int dim = 0;
  ForwardRmse forward;            // reconstruction at the encoder mean
  double rmse_mean = 0.0;         // inversion RMSE statistics over the test split
  double rmse_std = 0.0;
  std::vector<double> per_sample;
};

struct LatentSweepReport {
  std::vector<LatentSweepEntry> entries;

  [[nodiscard]] std::string to_csv() const;
  [[nodiscard]] std::string summary() const;
};

/// Trains one encoder ROM per latent dimension (shared seed and data)
/// and inverts a fixed held-out test split with full observations. The
/// last n_test records of the dataset form the test split.
LatentSweepReport latent_dim_sweep(const Dataset& dataset, const std::vector<int>& dims,
                                   const SveArchitecture& base_architecture,
                                   const TrainHyper& hyper, int n_test,
                                   const InversionOptions& opts, double noise_std,
                                   std::uint64_t noise_seed, int threads = 1);

struct SparsityEntry {
  int count = 0;  // observation points requested
  int actual_points = 0;
  double rmse_mean = 0.0;
  double rmse_std = 0.0;
  std::vector<double> per_sample;
};

struct SparsityReport {
  std::vector<SparsityEntry> entries;

  [[nodiscard]] std::string to_csv() const;
  [[nodiscard]] std::string summary() const;
};

/// Inversion quality across observation counts (descending): equispaced
/// masks, fresh noise per (count, record), full inversion each.
SparsityReport sparsity_sweep(const Rom& model, const Dataset& test,
                              const std::vector<int>& counts, double noise_std,
                              std::uint64_t noise_seed, const InversionOptions& opts,
                              int threads = 1);

struct ShiftSample {
  double mahal_u = 0.0;
  double mahal_v = 0.0;
  double mahal_z = 0.0;
  double rmse = 0.0;
};

struct ShiftCluster {
  std::string label;
  std::vector<ShiftSample> samples;
  ShiftSample mean;
};

struct ShiftReport {
  std::vector<ShiftCluster> clusters;

  [[nodiscard]] std::string to_csv() const;
  [[nodiscard]] std::string summary() const;
};

/// Per-sample (Mahalanobis distance, inversion RMSE) pairs for labeled
/// test sets against the training distribution: distances on easting
/// velocity, northing velocity, and the encoded latent mean.
ShiftReport shift_report(const SveModel& model,
                         const std::vector<std::pair<std::string, const Dataset*>>& test_sets,
                         const TrainStats& stats_u, const TrainStats& stats_v,
                         const TrainStats& stats_z, const InversionOptions& opts,
                         double noise_std, std::uint64_t noise_seed, int threads = 1);

/// Training-set statistics helpers for the shift study.
TrainStats stats_of_field(const Dataset& dataset, const std::vector<int>& records,
                          char field, int max_modes = 100, double nugget = 1e-6);
TrainStats stats_of_latents(const SveModel& model, const Dataset& dataset,
                            const std::vector<int>& records, double nugget = 1e-6);

}  // namespace bathyrom

#endif  // BATHYROM_DIAGNOSTICS_HPP
