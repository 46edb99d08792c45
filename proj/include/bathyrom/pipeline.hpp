#ifndef BATHYROM_PIPELINE_HPP
#define BATHYROM_PIPELINE_HPP

#include <cstdint>
#include <vector>

#include "bathyrom/dataset.hpp"
#include "bathyrom/forward.hpp"
#include "bathyrom/inversion.hpp"
#include "bathyrom/prior.hpp"
#include "bathyrom/rom.hpp"

namespace bathyrom {

struct GenerationResult {
  Dataset dataset;
  int rejections = 0;  // infeasible draws discarded by wet-channel retry
};

inline constexpr int kMaxSampleRetries = 100;

/// Synthetic data pipeline: sample bathymetry and BCs from the prior, run
/// the forward model, retry per record on infeasible draws (up to
/// kMaxSampleRetries). Deterministic per seed and independent of the
/// thread count.
GenerationResult generate_dataset(const ChannelGeometry& geometry, const PriorSpec& prior,
                                  const BcRanges& bc_ranges, const ForwardParams& forward,
                                  int n_records, std::uint64_t seed, int threads = 1);

/// Records [begin, end) as a standalone dataset sharing metadata.
Dataset subset_dataset(const Dataset& dataset, int begin, int end);
Dataset subset_dataset(const Dataset& dataset, const std::vector<int>& records);

/// Observations for one dataset record: the stored flow restricted to the
/// mask with fresh noise, BCs carried over. The injected noise has
/// standard deviation noise_std; the recorded per-entry levels add the
/// model error in quadrature (the misfit noise term covers observation
/// and surrogate uncertainty together).
ObservationSet synthesize_observations(const Dataset& dataset, int record,
                                       const ObservationMask& mask, double noise_std,
                                       std::uint64_t noise_seed,
                                       const VelocityError& model_error = {});

/// Inverts each listed record (noise seeds derived per record) and
/// returns the bathymetry reconstruction RMSE per record. Observation
/// noise levels are calibrated with the model's own validation error.
std::vector<double> inversion_rmse(const Rom& model, const Dataset& dataset,
                                   const std::vector<int>& records,
                                   const ObservationMask& mask, double noise_std,
                                   std::uint64_t seed, const InversionOptions& opts,
                                   int threads = 1);

/// Encoder-ROM forward-reconstruction RMSE per head over records
/// (decode at the encoder mean against the stored fields).
struct ForwardRmse {
  double u = 0.0;
  double v = 0.0;
  double s = 0.0;
};
ForwardRmse forward_rmse(const class SveModel& model, const Dataset& dataset,
                         const std::vector<int>& records);

double mean_of(const std::vector<double>& xs);
double std_of(const std::vector<double>& xs);

/// Seed stream for derived purposes (records, retries, noise draws).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

}  // namespace bathyrom

#endif  // BATHYROM_PIPELINE_HPP
