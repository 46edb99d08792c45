#include "bathyrom/inversion.hpp"

#include <algorithm>
#include <cmath>

#include "bathyrom/container.hpp"
#include "bathyrom/rng.hpp"

namespace bathyrom {
namespace {

Eigen::MatrixXd sigma_or_identity(const Eigen::MatrixXd& sigma_prior, int k) {
  if (sigma_prior.size() == 0) return Eigen::MatrixXd::Identity(k, k);
  if (sigma_prior.rows() != k || sigma_prior.cols() != k)
    throw ValidationError("inversion: sigma_prior shape does not match latent dimension");
  return sigma_prior;
}

Eigen::VectorXd noise_variance(const ObservationSet& obs) {
  return obs.noise_std.array().square();
}

StepForm resolve_form(StepForm form, Eigen::Index n_obs) {
  if (form != StepForm::kAuto) return form;
  return n_obs <= 256 ? StepForm::kDataSpace : StepForm::kInformation;
}

}  // namespace

double map_objective(const Eigen::VectorXd& z, const ObservationSet& obs, const Rom& model,
                     const Eigen::MatrixXd& sigma_prior) {
  if (z.size() != model.latent_dim())
    throw ValidationError("objective: latent dimension mismatch");
  const Eigen::MatrixXd sigma = sigma_or_identity(sigma_prior, model.latent_dim());
  const Eigen::VectorXd predicted = predict_observations(model, z, obs.bc, obs.mask);
  const Eigen::VectorXd resid = obs.values - predicted;
  const double data_term = (resid.array().square() / noise_variance(obs).array()).sum();
  const Eigen::VectorXd sz = sigma.ldlt().solve(z);
  return data_term + z.dot(sz);
}

Eigen::VectorXd gauss_newton_target(const Eigen::VectorXd& z, const ObservationSet& obs,
                                    const Eigen::VectorXd& predicted, const Eigen::MatrixXd& j,
                                    const Eigen::MatrixXd& sigma_prior, StepForm form) {
  const auto k = z.size();
  const auto n = obs.values.size();
  if (j.rows() != n || j.cols() != k)
    throw ValidationError("gauss-newton: Jacobian shape mismatch");
  const Eigen::MatrixXd sigma = sigma_or_identity(sigma_prior, static_cast<int>(k));
  const Eigen::VectorXd r_var = noise_variance(obs);
  const Eigen::VectorXd rhs_data = obs.values - predicted + j * z;

  if (resolve_form(form, n) == StepForm::kDataSpace) {
    Eigen::MatrixXd gram = j * sigma * j.transpose();
    gram.diagonal() += r_var;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    if (ldlt.info() != Eigen::Success)
      throw NumericsError("gauss-newton: factorization of (J Sigma J^T + R) failed");
    const Eigen::VectorXd target = sigma * j.transpose() * ldlt.solve(rhs_data);
    if (!target.allFinite())
      throw NumericsError("gauss-newton: non-finite update; R or Sigma degenerate");
    return target;
  }

  const Eigen::MatrixXd sigma_inv =
      sigma.ldlt().solve(Eigen::MatrixXd::Identity(k, k));
  const Eigen::MatrixXd jw = j.transpose() * r_var.cwiseInverse().asDiagonal();
  const Eigen::MatrixXd info = sigma_inv + jw * j;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
  if (ldlt.info() != Eigen::Success)
    throw NumericsError("gauss-newton: factorization of the information matrix failed");
  const Eigen::VectorXd target = ldlt.solve(jw * rhs_data);
  if (!target.allFinite())
    throw NumericsError("gauss-newton: non-finite update; R or Sigma degenerate");
  return target;
}

Eigen::VectorXd gauss_newton_step(const Eigen::VectorXd& z, const ObservationSet& obs,
                                  const Rom& model, const Eigen::MatrixXd& j, double alpha,
                                  const Eigen::MatrixXd& sigma_prior, StepForm form) {
  const Eigen::VectorXd predicted = predict_observations(model, z, obs.bc, obs.mask);
  const Eigen::VectorXd target = gauss_newton_target(z, obs, predicted, j, sigma_prior, form);
  return (1.0 - alpha) * z + alpha * target;
}

Eigen::MatrixXd jacobian_fd(const Rom& model, const Eigen::VectorXd& z,
                            const ObservationSet& obs, double fd_delta) {
  if (!(fd_delta > 0.0)) throw ValidationError("jacobian_fd: fd_delta must be positive");
  const Eigen::VectorXd base = predict_observations(model, z, obs.bc, obs.mask);
  Eigen::MatrixXd j(base.size(), z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    Eigen::VectorXd shifted = z;
    shifted[i] += fd_delta;
    const Eigen::VectorXd pred = predict_observations(model, shifted, obs.bc, obs.mask);
    if (!pred.allFinite()) throw NumericsError("jacobian_fd: non-finite decoder output");
    j.col(i) = (pred - base) / fd_delta;
  }
  return j;
}

LineSearchResult line_search(const std::function<double(double)>& objective_at_alpha,
                             double objective_now, double predicted_decrease,
                             const LineSearchOptions& opts, double alpha_init) {
  opts.validate();
  const double alpha_min =
      alpha_init * std::pow(opts.shrink, static_cast<double>(opts.max_backtracks));
  if (!(predicted_decrease > 0.0))
    return {alpha_min, objective_now, true};
  double alpha = alpha_init;
  for (int t = 0; t <= opts.max_backtracks; ++t) {
    const double f = objective_at_alpha(alpha);
    if (std::isfinite(f) &&
        f <= objective_now - opts.sufficient_decrease * alpha * predicted_decrease)
      return {alpha, f, false};
    alpha *= opts.shrink;
  }
  return {alpha_min, objective_now, true};
}

PosteriorEstimate invert(const ObservationSet& obs, const Rom& model,
                         const InversionOptions& opts) {
  opts.validate();
  obs.validate(model.geometry());
  const int k = model.latent_dim();
  const Eigen::MatrixXd sigma = sigma_or_identity(opts.sigma_prior, k);
  const Eigen::MatrixXd sigma_inv =
      sigma.ldlt().solve(Eigen::MatrixXd::Identity(k, k));
  const Eigen::VectorXd r_var = noise_variance(obs);

  PosteriorEstimate est;
  Eigen::VectorXd z = Eigen::VectorXd::Zero(k);
  double objective = map_objective(z, obs, model, sigma);
  est.objective_trace.push_back(objective);

  Eigen::MatrixXd j;
  double grad_norm0 = -1.0;
  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    j = opts.jacobian_mode == JacobianMode::kAnalytic
            ? model.velocity_jacobian(z, obs.bc, obs.mask)
            : jacobian_fd(model, z, obs, opts.fd_delta);
    const Eigen::VectorXd predicted = predict_observations(model, z, obs.bc, obs.mask);
    const Eigen::VectorXd resid = obs.values - predicted;
    const Eigen::VectorXd grad =
        2.0 * (sigma_inv * z - j.transpose() * (resid.array() / r_var.array()).matrix());
    const double grad_norm = grad.norm();
    if (grad_norm0 < 0.0) grad_norm0 = grad_norm;
    if (grad_norm <= opts.grad_tol_rel * grad_norm0) {
      est.converged = true;
      break;
    }

    const Eigen::VectorXd target =
        gauss_newton_target(z, obs, predicted, j, sigma, opts.step_form);
    const Eigen::VectorXd direction = target - z;
    const double predicted_decrease = -grad.dot(direction);
    const auto ls = line_search(
        [&](double alpha) {
          return map_objective(z + alpha * direction, obs, model, sigma);
        },
        objective, predicted_decrease, opts.line_search, opts.alpha_init);
    if (ls.stalled) {
      est.stalled = true;
      break;
    }
    z += ls.alpha * direction;
    objective = ls.objective;
    est.objective_trace.push_back(objective);
    est.iterations_used = iter + 1;
  }

  est.z_map = z;
  // Covariance at the final point (recompute the Jacobian if z moved).
  j = opts.jacobian_mode == JacobianMode::kAnalytic
          ? model.velocity_jacobian(z, obs.bc, obs.mask)
          : jacobian_fd(model, z, obs, opts.fd_delta);
  est.q_post = posterior_covariance(j, sigma, r_var);
  est.bathymetry_map = BathymetryField{model.geometry(), model.decode_bathymetry(z, obs.bc)};
  if (opts.uq_samples > 0)
    est.bathymetry_std = bathymetry_uncertainty(model, z, obs.bc, est.q_post,
                                                opts.uq_samples, opts.uq_seed);
  return est;
}

Eigen::MatrixXd posterior_covariance(const Eigen::MatrixXd& j,
                                     const Eigen::MatrixXd& sigma_prior,
                                     const Eigen::VectorXd& noise_var) {
  const auto k = j.cols();
  if (noise_var.size() != j.rows())
    throw ValidationError("posterior covariance: noise vector length mismatch");
  const Eigen::MatrixXd sigma = sigma_or_identity(sigma_prior, static_cast<int>(k));
  const Eigen::MatrixXd info =
      sigma.ldlt().solve(Eigen::MatrixXd::Identity(k, k)) +
      j.transpose() * noise_var.cwiseInverse().asDiagonal() * j;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
  if (ldlt.info() != Eigen::Success)
    throw NumericsError("posterior covariance: singular information matrix");
  Eigen::MatrixXd q = ldlt.solve(Eigen::MatrixXd::Identity(k, k));
  if (!q.allFinite())
    throw NumericsError("posterior covariance: singular information matrix");
  return 0.5 * (q + q.transpose());
}

Eigen::MatrixXd posterior_covariance_data_form(const Eigen::MatrixXd& j,
                                               const Eigen::MatrixXd& sigma_prior,
                                               const Eigen::VectorXd& noise_var) {
  const auto k = j.cols();
  if (noise_var.size() != j.rows())
    throw ValidationError("posterior covariance: noise vector length mismatch");
  const Eigen::MatrixXd sigma = sigma_or_identity(sigma_prior, static_cast<int>(k));
  Eigen::MatrixXd gram = j * sigma * j.transpose();
  gram.diagonal() += noise_var;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success)
    throw NumericsError("posterior covariance: factorization of (J Sigma J^T + R) failed");
  const Eigen::MatrixXd js = j * sigma;
  Eigen::MatrixXd q = sigma - js.transpose() * ldlt.solve(js);
  return 0.5 * (q + q.transpose());
}

Eigen::MatrixXd bathymetry_uncertainty(const Rom& model, const Eigen::VectorXd& z_map,
                                       const BoundaryConditions& bc,
                                       const Eigen::MatrixXd& q_post, int n_samples,
                                       std::uint64_t seed) {
  if (n_samples < 1) throw ValidationError("uncertainty: n_samples must be >= 1");
  if (q_post.rows() != z_map.size() || q_post.cols() != z_map.size())
    throw ValidationError("uncertainty: covariance shape mismatch");
  // Sampling factor via the eigendecomposition; semidefinite covariances
  // (including zero) are fine, anything below a -1e-10 jitter margin is
  // rejected.
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(q_post);
  if (eig.info() != Eigen::Success)
    throw NumericsError("uncertainty: covariance eigendecomposition failed");
  if (eig.eigenvalues().minCoeff() < -1e-10)
    throw NumericsError("uncertainty: posterior covariance is not positive semidefinite");
  const Eigen::MatrixXd chol =
      eig.eigenvectors() *
      eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();

  // Accumulate deviations from a reference sample; the plain sum-of-
  // squares form cancels catastrophically when the spread is tiny.
  Rng rng(seed);
  const auto& g = model.geometry();
  const Eigen::MatrixXd reference = model.decode_bathymetry(z_map, bc);
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(g.n_across, g.n_along);
  Eigen::MatrixXd sumsq = Eigen::MatrixXd::Zero(g.n_across, g.n_along);
  Eigen::VectorXd xi(z_map.size());
  for (int s = 0; s < n_samples; ++s) {
    for (Eigen::Index i = 0; i < xi.size(); ++i) xi[i] = rng.normal();
    const Eigen::MatrixXd dev =
        model.decode_bathymetry(z_map + chol * xi, bc) - reference;
    sum += dev;
    sumsq += dev.array().square().matrix();
  }
  const double n = static_cast<double>(n_samples);
  Eigen::MatrixXd variance = (sumsq / n - (sum / n).array().square().matrix()).cwiseMax(0.0);
  return variance.array().sqrt();
}

void save_posterior(const PosteriorEstimate& estimate, const std::string& model_kind,
                    const std::filesystem::path& path) {
  Container c;
  c.put_string("meta/model_kind", model_kind);
  c.put_vector_f64("result/z_map", estimate.z_map);
  c.put_matrix_f64("result/q_post", estimate.q_post);
  c.put_u32("geometry/dims", {2},
            {static_cast<std::uint32_t>(estimate.bathymetry_map.geometry.n_across),
             static_cast<std::uint32_t>(estimate.bathymetry_map.geometry.n_along)});
  c.put_f64("geometry/spacing", {2},
            {estimate.bathymetry_map.geometry.dx, estimate.bathymetry_map.geometry.dy});
  c.put_matrix_f32("result/bathymetry_map", estimate.bathymetry_map.bed_elevation);
  if (estimate.bathymetry_std.size() > 0)
    c.put_matrix_f32("result/bathymetry_std", estimate.bathymetry_std);
  c.put_f64("result/objective_trace",
            {estimate.objective_trace.size()}, estimate.objective_trace);
  c.put_scalar_u32("result/converged", estimate.converged ? 1 : 0);
  c.put_scalar_u32("result/stalled", estimate.stalled ? 1 : 0);
  c.put_scalar_u32("result/iterations_used",
                   static_cast<std::uint32_t>(estimate.iterations_used));
  c.save(path);
}

PosteriorEstimate load_posterior(const std::filesystem::path& path) {
  const Container c = Container::load(path);
  PosteriorEstimate est;
  est.z_map = c.get_vector("result/z_map");
  est.q_post = c.get_matrix("result/q_post");
  const auto dims = c.get_u32("geometry/dims");
  const auto spacing = c.get_f64("geometry/spacing");
  est.bathymetry_map.geometry = ChannelGeometry{static_cast<int>(dims[0]),
                                                static_cast<int>(dims[1]), spacing[0],
                                                spacing[1]};
  est.bathymetry_map.bed_elevation = c.get_matrix("result/bathymetry_map");
  if (c.has("result/bathymetry_std"))
    est.bathymetry_std = c.get_matrix("result/bathymetry_std");
  const auto trace = c.get_f64("result/objective_trace");
  est.objective_trace.assign(trace.begin(), trace.end());
  est.converged = c.get_scalar_u32("result/converged") != 0;
  est.stalled = c.get_scalar_u32("result/stalled") != 0;
  est.iterations_used = static_cast<int>(c.get_scalar_u32("result/iterations_used"));
  return est;
}

}  // namespace bathyrom
