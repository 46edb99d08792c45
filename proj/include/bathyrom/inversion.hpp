#ifndef BATHYROM_INVERSION_HPP
#define BATHYROM_INVERSION_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "bathyrom/rom.hpp"

namespace bathyrom {

enum class JacobianMode { kAnalytic, kFiniteDifference };

/// Which algebraic form of the Gauss-Newton update to solve. The two are
/// mathematically identical; the data-space form factorizes an
/// n_obs-sized system, the information form a latent-sized one. kAuto
/// picks by size.
enum class StepForm { kAuto, kDataSpace, kInformation };

struct LineSearchOptions {
  double shrink = 0.5;
  int max_backtracks = 20;
  double sufficient_decrease = 1e-4;

  void validate() const {
    if (!(shrink > 0.0) || !(shrink < 1.0))
      throw ValidationError("line search: shrink must lie in (0, 1)");
    if (max_backtracks < 0) throw ValidationError("line search: max_backtracks must be >= 0");
    if (sufficient_decrease < 0.0)
      throw ValidationError("line search: sufficient_decrease must be >= 0");
  }
};

struct InversionOptions {
  int max_iterations = 10;
  double grad_tol_rel = 1e-6;  // relative to the initial gradient norm
  double alpha_init = 1.0;
  LineSearchOptions line_search;
  JacobianMode jacobian_mode = JacobianMode::kAnalytic;
  double fd_delta = 1e-4;
  Eigen::MatrixXd sigma_prior;  // empty means identity
  StepForm step_form = StepForm::kAuto;
  int uq_samples = 1000;
  std::uint64_t uq_seed = 0x5eed;

  void validate() const {
    if (max_iterations < 1) throw ValidationError("inversion: max_iterations must be >= 1");
    if (!(grad_tol_rel >= 0.0)) throw ValidationError("inversion: grad_tol must be >= 0");
    if (!(alpha_init > 0.0)) throw ValidationError("inversion: alpha_init must be positive");
    if (!(fd_delta > 0.0)) throw ValidationError("inversion: fd_delta must be positive");
    if (uq_samples < 0) throw ValidationError("inversion: uq_samples must be >= 0");
    line_search.validate();
  }
};

struct PosteriorEstimate {
  Eigen::VectorXd z_map;
  Eigen::MatrixXd q_post;
  BathymetryField bathymetry_map;
  Eigen::MatrixXd bathymetry_std;       // pointwise, m; empty when uq_samples == 0
  std::vector<double> objective_trace;  // initial value plus one per accepted step
  bool converged = false;
  bool stalled = false;
  int iterations_used = 0;
};

/// Weighted misfit plus latent prior:
/// (y - yhat)^T R^-1 (y - yhat) + z^T Sigma^-1 z.
double map_objective(const Eigen::VectorXd& z, const ObservationSet& obs, const Rom& model,
                     const Eigen::MatrixXd& sigma_prior = Eigen::MatrixXd());

/// The alpha = 1 Gauss-Newton target zhat solving the linearized MAP
/// problem at z; the step is z + alpha (zhat - z).
Eigen::VectorXd gauss_newton_target(const Eigen::VectorXd& z, const ObservationSet& obs,
                                    const Eigen::VectorXd& predicted, const Eigen::MatrixXd& j,
                                    const Eigen::MatrixXd& sigma_prior,
                                    StepForm form = StepForm::kAuto);

Eigen::VectorXd gauss_newton_step(const Eigen::VectorXd& z, const ObservationSet& obs,
                                  const Rom& model, const Eigen::MatrixXd& j, double alpha,
                                  const Eigen::MatrixXd& sigma_prior = Eigen::MatrixXd(),
                                  StepForm form = StepForm::kAuto);

/// Forward-difference Jacobian of the masked velocity prediction,
/// exactly latent_dim + 1 decoder evaluations.
Eigen::MatrixXd jacobian_fd(const Rom& model, const Eigen::VectorXd& z,
                            const ObservationSet& obs, double fd_delta);

struct LineSearchResult {
  double alpha = 0.0;
  double objective = 0.0;
  bool stalled = false;
};

/// Backtracking with sufficient decrease over the step family
/// alpha_init * shrink^t. objective_at_alpha must evaluate the objective
/// at the trial point; predicted_decrease is -grad^T (zhat - z) at full
/// step. When no trial qualifies the smallest trial is reported with the
/// stall flag raised and the objective left at its current value.
LineSearchResult line_search(const std::function<double(double)>& objective_at_alpha,
                             double objective_now, double predicted_decrease,
                             const LineSearchOptions& opts, double alpha_init);

/// Gauss-Newton MAP iteration from z = 0 with backtracking line search;
/// fills the full posterior estimate (covariance in information form at
/// the converged point, pointwise bathymetry spread by sampling).
PosteriorEstimate invert(const ObservationSet& obs, const Rom& model,
                         const InversionOptions& opts);

/// (Sigma^-1 + J^T R^-1 J)^-1 with R = diag(noise_var).
Eigen::MatrixXd posterior_covariance(const Eigen::MatrixXd& j,
                                     const Eigen::MatrixXd& sigma_prior,
                                     const Eigen::VectorXd& noise_var);

/// Sigma - Sigma J^T (J Sigma J^T + R)^-1 J Sigma; algebraically equal to
/// the information form, kept as an independent route.
Eigen::MatrixXd posterior_covariance_data_form(const Eigen::MatrixXd& j,
                                               const Eigen::MatrixXd& sigma_prior,
                                               const Eigen::VectorXd& noise_var);

/// Pointwise standard deviation of the decoded bathymetry over n_samples
/// draws z ~ N(z_map, q_post), deterministic per seed.
Eigen::MatrixXd bathymetry_uncertainty(const Rom& model, const Eigen::VectorXd& z_map,
                                       const BoundaryConditions& bc,
                                       const Eigen::MatrixXd& q_post, int n_samples,
                                       std::uint64_t seed);

void save_posterior(const PosteriorEstimate& estimate, const std::string& model_kind,
                    const std::filesystem::path& path);
PosteriorEstimate load_posterior(const std::filesystem::path& path);

}  // namespace bathyrom

#endif  // BATHYROM_INVERSION_HPP
