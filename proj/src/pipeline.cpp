#include "bathyrom/pipeline.hpp"

#include <atomic>
#include <cmath>

#include "bathyrom/metrics.hpp"
#include "bathyrom/parallel.hpp"
#include "bathyrom/rom_sve.hpp"

namespace bathyrom {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b,
                          std::uint64_t c) {
  std::uint64_t h = base ^ 0x9e3779b97f4a7c15ull;
  for (std::uint64_t x : {a, b, c}) {
    h ^= x + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    h *= 0xff51afd7ed558ccdull;
    h ^= h >> 33;
  }
  return h;
}

GenerationResult generate_dataset(const ChannelGeometry& geometry, const PriorSpec& prior,
                                  const BcRanges& bc_ranges, const ForwardParams& forward,
                                  int n_records, std::uint64_t seed, int threads) {
  if (n_records < 1) throw ValidationError("generate: need at least one record");
  geometry.validate();
  bc_ranges.validate();
  forward.validate();
  const FieldBasis basis = build_prior_basis(geometry, prior);

  struct Draw {
    BathymetryField bathy;
    BoundaryConditions bc;
    FlowField flow;
  };
  std::vector<Draw> draws(static_cast<std::size_t>(n_records));
  std::vector<int> rejections(static_cast<std::size_t>(n_records), 0);

  parallel_for(n_records, threads, [&](int r) {
    for (int attempt = 0; attempt < kMaxSampleRetries; ++attempt) {
      const std::uint64_t field_seed =
          derive_seed(seed, static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(attempt), 0);
      const std::uint64_t bc_seed =
          derive_seed(seed, static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(attempt), 1);
      BathymetryField bathy = sample_bathymetry(basis, field_seed);
      BoundaryConditions bc = sample_bc(bc_ranges, bc_seed);
      try {
        FlowField flow = simulate(bathy, bc, forward);
        draws[static_cast<std::size_t>(r)] =
            Draw{std::move(bathy), bc, std::move(flow)};
        return;
      } catch (const InfeasibleBathymetry&) {
        ++rejections[static_cast<std::size_t>(r)];
      }
    }
    throw RuntimeError("generate: record " + std::to_string(r) + " exhausted " +
                       std::to_string(kMaxSampleRetries) + " wet-channel retries");
  });

  GenerationResult result;
  result.dataset.geometry = geometry;
  result.dataset.metadata = {
      {"prior", prior.family_name()},
      {"seed", std::to_string(seed)},
      {"sigma", std::to_string(prior.kernel.sigma)},
      {"len_along", std::to_string(prior.kernel.len_along)},
      {"len_across", std::to_string(prior.kernel.len_across)},
      {"n_modes", std::to_string(prior.n_modes)},
      {"manning_n", std::to_string(forward.manning_n)},
  };
  for (const auto& d : draws) result.dataset.add_record(d.bathy, d.bc, d.flow);
  for (int r : rejections) result.rejections += r;
  return result;
}

Dataset subset_dataset(const Dataset& dataset, int begin, int end) {
  std::vector<int> records;
  for (int i = begin; i < end; ++i) records.push_back(i);
  return subset_dataset(dataset, records);
}

Dataset subset_dataset(const Dataset& dataset, const std::vector<int>& records) {
  Dataset out;
  out.geometry = dataset.geometry;
  out.metadata = dataset.metadata;
  out.metadata.emplace_back("subset_of", std::to_string(dataset.records.size()));
  for (int r : records) out.records.push_back(dataset.records.at(static_cast<std::size_t>(r)));
  return out;
}

ObservationSet synthesize_observations(const Dataset& dataset, int record,
                                       const ObservationMask& mask, double noise_std,
                                       std::uint64_t noise_seed,
                                       const VelocityError& model_error) {
  if (record < 0 || record >= static_cast<int>(dataset.records.size()))
    throw ValidationError("observations: record index out of range");
  const FlowField flow = dataset.flow_field(static_cast<std::size_t>(record));
  ObservationSet obs = observe(flow, mask, noise_std, noise_seed,
                               dataset.records[static_cast<std::size_t>(record)].bc);
  const auto n_pts = static_cast<Eigen::Index>(mask.indices.size());
  Eigen::Index row = 0;
  if (mask.includes_u) {
    obs.noise_std.segment(row, n_pts).setConstant(
        std::hypot(noise_std, model_error.u));
    row += n_pts;
  }
  if (mask.includes_v)
    obs.noise_std.segment(row, n_pts).setConstant(
        std::hypot(noise_std, model_error.v));
  return obs;
}

std::vector<double> inversion_rmse(const Rom& model, const Dataset& dataset,
                                   const std::vector<int>& records,
                                   const ObservationMask& mask, double noise_std,
                                   std::uint64_t seed, const InversionOptions& opts,
                                   int threads) {
  std::vector<double> rmse(records.size(), 0.0);
  InversionOptions fast = opts;
  fast.uq_samples = 0;  // reconstruction error only; no posterior sampling
  const VelocityError model_error = model.velocity_model_error();
  parallel_for(static_cast<int>(records.size()), threads, [&](int i) {
    const int rec = records[static_cast<std::size_t>(i)];
    const ObservationSet obs = synthesize_observations(
        dataset, rec, mask, noise_std, derive_seed(seed, static_cast<std::uint64_t>(rec)),
        model_error);
    const PosteriorEstimate est = invert(obs, model, fast);
    rmse[static_cast<std::size_t>(i)] =
        grid_rmse(est.bathymetry_map.bed_elevation,
                  dataset.records[static_cast<std::size_t>(rec)].bathymetry);
  });
  return rmse;
}

ForwardRmse forward_rmse(const SveModel& model, const Dataset& dataset,
                         const std::vector<int>& records) {
  if (records.empty()) throw ValidationError("forward rmse: no records");
  double su = 0.0, sv = 0.0, ss = 0.0;
  for (int r : records) {
    const auto& rec = dataset.records.at(static_cast<std::size_t>(r));
    const LatentGaussian g =
        model.encode(BathymetryField{dataset.geometry, rec.bathymetry}, rec.bc);
    const Rom::Decoded d = model.decode(g.mu, rec.bc);
    su += grid_rmse(d.u, rec.u);
    sv += grid_rmse(d.v, rec.v);
    ss += grid_rmse(d.s, rec.bathymetry);
  }
  const double n = static_cast<double>(records.size());
  return ForwardRmse{su / n, sv / n, ss / n};
}

double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

double std_of(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double mu = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - mu) * (x - mu);
  return std::sqrt(s / static_cast<double>(xs.size()));
}

}  // namespace bathyrom
