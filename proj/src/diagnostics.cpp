#include "bathyrom/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bathyrom/metrics.hpp"
#include "bathyrom/parallel.hpp"

namespace bathyrom {

TrainStats compute_train_stats(const Eigen::MatrixXd& samples, int max_modes, double nugget) {
  const Eigen::Index n = samples.rows(), m = samples.cols();
  if (n < 2) throw ValidationError("train stats: need at least two samples");
  if (!(nugget > 0.0)) throw ValidationError("train stats: nugget must be positive");
  TrainStats stats;
  stats.nugget = nugget;
  stats.mean = samples.colwise().mean();
  const Eigen::MatrixXd centered = samples.rowwise() - stats.mean.transpose();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const int kept = std::min<Eigen::Index>({max_modes, n - 1, m});
  stats.eigenvalues =
      svd.singularValues().head(kept).array().square() / static_cast<double>(n - 1);
  stats.eigenvectors = svd.matrixV().leftCols(kept);
  return stats;
}

double mahalanobis(const Eigen::VectorXd& x, const TrainStats& stats) {
  if (x.size() != stats.mean.size())
    throw ValidationError("mahalanobis: dimension mismatch");
  if (!(stats.nugget > 0.0) && (stats.eigenvalues.array() <= 0.0).any())
    throw NumericsError("mahalanobis: zero eigenvalues without a nugget");
  const Eigen::VectorXd r = x - stats.mean;
  const Eigen::VectorXd coeff = stats.eigenvectors.transpose() * r;
  // Sigma = V diag(lambda) V^T + nugget I. Split r into its span part
  // (weighted by 1/(lambda+nu)) and the explicit out-of-span residual
  // (weighted by 1/nu); subtracting the span energy from |r|^2 instead
  // cancels catastrophically.
  const Eigen::VectorXd residual = r - stats.eigenvectors * coeff;
  double quad = residual.squaredNorm() / stats.nugget;
  for (Eigen::Index i = 0; i < coeff.size(); ++i)
    quad += coeff[i] * coeff[i] / (stats.eigenvalues[i] + stats.nugget);
  return std::sqrt(quad / static_cast<double>(x.size()));
}

Eigen::VectorXd hessian_spectrum(const std::function<double(const Eigen::VectorXd&)>& loss,
                                 const Eigen::VectorXd& z, double h) {
  if (!(h > 0.0)) throw ValidationError("hessian: step must be positive");
  const auto k = z.size();
  const double f0 = loss(z);
  if (!std::isfinite(f0)) throw NumericsError("hessian: non-finite loss at the base point");
  auto probe = [&](Eigen::Index i, double si, Eigen::Index j, double sj) {
    Eigen::VectorXd p = z;
    p[i] += si * h;
    p[j] += sj * h;
    const double f = loss(p);
    if (!std::isfinite(f)) throw NumericsError("hessian: non-finite loss at a probe point");
    return f;
  };
  Eigen::MatrixXd hess(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    hess(i, i) = (probe(i, 1, i, 1) - 2.0 * f0 + probe(i, -1, i, -1)) / (4.0 * h * h);
    for (Eigen::Index j = i + 1; j < k; ++j) {
      const double value = (probe(i, 1, j, 1) - probe(i, 1, j, -1) - probe(i, -1, j, 1) +
                            probe(i, -1, j, -1)) /
                           (4.0 * h * h);
      hess(i, j) = value;
      hess(j, i) = value;
    }
  }
  hess = 0.5 * (hess + hess.transpose()).eval();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(hess);
  return svd.singularValues();
}

Eigen::VectorXd model_hessian_spectrum(const Rom& model, LossTerm term,
                                       const Eigen::VectorXd& z, const BoundaryConditions& bc,
                                       double h) {
  const Rom::Decoded ref = model.decode(z, bc);
  return hessian_spectrum(
      [&](const Eigen::VectorXd& p) {
        const Rom::Decoded d = model.decode(p, bc);
        const Eigen::MatrixXd* probe_field;
        const Eigen::MatrixXd* ref_field;
        switch (term) {
          case LossTerm::kU: probe_field = &d.u; ref_field = &ref.u; break;
          case LossTerm::kV: probe_field = &d.v; ref_field = &ref.v; break;
          default: probe_field = &d.s; ref_field = &ref.s; break;
        }
        return (*probe_field - *ref_field).squaredNorm() /
               static_cast<double>(probe_field->size());
      },
      z, h);
}

namespace {

ShiftSample cluster_mean(const std::vector<ShiftSample>& samples) {
  ShiftSample m;
  for (const auto& s : samples) {
    m.mahal_u += s.mahal_u;
    m.mahal_v += s.mahal_v;
    m.mahal_z += s.mahal_z;
    m.rmse += s.rmse;
  }
  const double n = std::max<std::size_t>(1, samples.size());
  m.mahal_u /= n;
  m.mahal_v /= n;
  m.mahal_z /= n;
  m.rmse /= n;
  return m;
}

}  // namespace

LatentSweepReport latent_dim_sweep(const Dataset& dataset, const std::vector<int>& dims,
                                   const SveArchitecture& base_architecture,
                                   const TrainHyper& hyper, int n_test,
                                   const InversionOptions& opts, double noise_std,
                                   std::uint64_t noise_seed, int threads) {
  for (std::size_t i = 1; i < dims.size(); ++i)
    if (dims[i] < dims[i - 1])
      throw ValidationError("latent sweep: dims must be non-descending");
  const int n = static_cast<int>(dataset.records.size());
  if (n_test < 1 || n_test >= n)
    throw ValidationError("latent sweep: test split size out of range");
  const Dataset train = subset_dataset(dataset, 0, n - n_test);
  const Dataset test = subset_dataset(dataset, n - n_test, n);
  std::vector<int> test_records(static_cast<std::size_t>(n_test));
  for (int i = 0; i < n_test; ++i) test_records[static_cast<std::size_t>(i)] = i;
  const ObservationMask mask = full_mask(dataset.geometry);

  LatentSweepReport report;
  for (int dim : dims) {
    SveArchitecture arch = base_architecture;
    arch.latent_dim = dim;
    const SveModel model = train_sve(train, arch, hyper);
    LatentSweepEntry entry;
    entry.dim = dim;
    entry.forward = forward_rmse(model, test, test_records);
    entry.per_sample =
        inversion_rmse(model, test, test_records, mask, noise_std, noise_seed, opts, threads);
    entry.rmse_mean = mean_of(entry.per_sample);
    entry.rmse_std = std_of(entry.per_sample);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

SparsityReport sparsity_sweep(const Rom& model, const Dataset& test,
                              const std::vector<int>& counts, double noise_std,
                              std::uint64_t noise_seed, const InversionOptions& opts,
                              int threads) {
  for (std::size_t i = 1; i < counts.size(); ++i)
    if (counts[i] > counts[i - 1])
      throw ValidationError("sparsity sweep: counts must be non-ascending");
  std::vector<int> records(test.records.size());
  for (std::size_t i = 0; i < records.size(); ++i) records[i] = static_cast<int>(i);

  SparsityReport report;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    const ObservationMask mask = equispaced_mask(test.geometry, counts[c]);
    SparsityEntry entry;
    entry.count = counts[c];
    entry.actual_points = static_cast<int>(mask.point_count());
    entry.per_sample = inversion_rmse(model, test, records, mask, noise_std,
                                      derive_seed(noise_seed, c), opts, threads);
    entry.rmse_mean = mean_of(entry.per_sample);
    entry.rmse_std = std_of(entry.per_sample);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

ShiftReport shift_report(const SveModel& model,
                         const std::vector<std::pair<std::string, const Dataset*>>& test_sets,
                         const TrainStats& stats_u, const TrainStats& stats_v,
                         const TrainStats& stats_z, const InversionOptions& opts,
                         double noise_std, std::uint64_t noise_seed, int threads) {
  ShiftReport report;
  const ObservationMask mask = full_mask(model.geometry());
  for (std::size_t set_i = 0; set_i < test_sets.size(); ++set_i) {
    const auto& [label, dataset] = test_sets[set_i];
    if (dataset->geometry != model.geometry())
      throw ValidationError("shift report: test set geometry mismatch");
    ShiftCluster cluster;
    cluster.label = label;
    cluster.samples.resize(dataset->records.size());
    std::vector<int> records(dataset->records.size());
    for (std::size_t i = 0; i < records.size(); ++i) records[i] = static_cast<int>(i);
    const std::vector<double> rmse =
        inversion_rmse(model, *dataset, records, mask, noise_std,
                       derive_seed(noise_seed, set_i), opts, threads);
    parallel_for(static_cast<int>(records.size()), threads, [&](int i) {
      const auto& rec = dataset->records[static_cast<std::size_t>(i)];
      ShiftSample s;
      s.mahal_u = mahalanobis(flatten(rec.u), stats_u);
      s.mahal_v = mahalanobis(flatten(rec.v), stats_v);
      const LatentGaussian g =
          model.encode(BathymetryField{dataset->geometry, rec.bathymetry}, rec.bc);
      s.mahal_z = mahalanobis(g.mu, stats_z);
      s.rmse = rmse[static_cast<std::size_t>(i)];
      cluster.samples[static_cast<std::size_t>(i)] = s;
    });
    cluster.mean = cluster_mean(cluster.samples);
    report.clusters.push_back(std::move(cluster));
  }
  return report;
}

TrainStats stats_of_field(const Dataset& dataset, const std::vector<int>& records,
                          char field, int max_modes, double nugget) {
  const int m = dataset.geometry.node_count();
  Eigen::MatrixXd samples(static_cast<Eigen::Index>(records.size()), m);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = dataset.records.at(static_cast<std::size_t>(records[i]));
    const Eigen::MatrixXd& grid = field == 'u' ? rec.u : field == 'v' ? rec.v : rec.bathymetry;
    samples.row(static_cast<Eigen::Index>(i)) = flatten(grid).transpose();
  }
  return compute_train_stats(samples, max_modes, nugget);
}

TrainStats stats_of_latents(const SveModel& model, const Dataset& dataset,
                            const std::vector<int>& records, double nugget) {
  Eigen::MatrixXd samples(static_cast<Eigen::Index>(records.size()), model.latent_dim());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = dataset.records.at(static_cast<std::size_t>(records[i]));
    const LatentGaussian g =
        model.encode(BathymetryField{dataset.geometry, rec.bathymetry}, rec.bc);
    samples.row(static_cast<Eigen::Index>(i)) = g.mu.transpose();
  }
  return compute_train_stats(samples, model.latent_dim(), nugget);
}

std::string LatentSweepReport::to_csv() const {
  std::ostringstream out;
  out << "latent_dim,sample,inversion_rmse\n";
  for (const auto& e : entries)
    for (std::size_t i = 0; i < e.per_sample.size(); ++i)
      out << e.dim << "," << i << "," << e.per_sample[i] << "\n";
  return out.str();
}

std::string LatentSweepReport::summary() const {
  std::ostringstream out;
  out << "latent_dim  fwd_u      fwd_v      fwd_s      inv_mean   inv_std\n";
  for (const auto& e : entries) {
    char line[160];
    std::snprintf(line, sizeof line, "%-10d  %-9.4f  %-9.4f  %-9.4f  %-9.4f  %-9.4f\n",
                  e.dim, e.forward.u, e.forward.v, e.forward.s, e.rmse_mean, e.rmse_std);
    out << line;
  }
  return out.str();
}

std::string SparsityReport::to_csv() const {
  std::ostringstream out;
  out << "requested_points,actual_points,sample,inversion_rmse\n";
  for (const auto& e : entries)
    for (std::size_t i = 0; i < e.per_sample.size(); ++i)
      out << e.count << "," << e.actual_points << "," << i << "," << e.per_sample[i] << "\n";
  return out.str();
}

std::string SparsityReport::summary() const {
  std::ostringstream out;
  out << "points     actual     rmse_mean  rmse_std\n";
  for (const auto& e : entries) {
    char line[120];
    std::snprintf(line, sizeof line, "%-9d  %-9d  %-9.4f  %-9.4f\n", e.count,
                  e.actual_points, e.rmse_mean, e.rmse_std);
    out << line;
  }
  return out.str();
}

std::string ShiftReport::to_csv() const {
  std::ostringstream out;
  out << "cluster,sample,mahal_u,mahal_v,mahal_latent,inversion_rmse\n";
  for (const auto& c : clusters)
    for (std::size_t i = 0; i < c.samples.size(); ++i) {
      const auto& s = c.samples[i];
      out << c.label << "," << i << "," << s.mahal_u << "," << s.mahal_v << "," << s.mahal_z
          << "," << s.rmse << "\n";
    }
  return out.str();
}

std::string ShiftReport::summary() const {
  std::ostringstream out;
  out << "cluster               mahal_u    mahal_v    mahal_z    rmse\n";
  for (const auto& c : clusters) {
    char line[160];
    std::snprintf(line, sizeof line, "%-20s  %-9.4f  %-9.4f  %-9.4f  %-9.4f\n",
                  c.label.c_str(), c.mean.mahal_u, c.mean.mahal_v, c.mean.mahal_z,
                  c.mean.rmse);
    out << line;
  }
  return out.str();
}

}  // namespace bathyrom
