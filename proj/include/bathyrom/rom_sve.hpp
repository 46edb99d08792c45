#ifndef BATHYROM_ROM_SVE_HPP
#define BATHYROM_ROM_SVE_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "bathyrom/dataset.hpp"
#include "bathyrom/nn.hpp"
#include "bathyrom/rom.hpp"

namespace bathyrom {

struct SveArchitecture {
  int latent_dim = 20;
  std::vector<int> encoder_widths{512, 128};
  std::vector<int> decoder_widths{128, 512};
  double kl_weight = 1e-3;
  bool bc_embedding = true;  // normalized BC scalars appended to both nets' inputs

  void validate() const;
};

struct LatentGaussian {
  Eigen::VectorXd mu;
  Eigen::VectorXd log_var;
};

/// Per-field normalization of the model's inputs and outputs.
struct Normalization {
  FieldNorm s, u, v, discharge, stage;
};

struct TrainHyper {
  int epochs = 300;
  int batch_size = 64;
  double step_size = 1e-3;
  /// Step size decays geometrically to step_size * final_step_factor
  /// over the run; 1.0 keeps it constant.
  double final_step_factor = 0.03;
  std::uint64_t seed = 7;
  double val_fraction = 0.1;

  void validate() const;

  [[nodiscard]] double step_at(int epoch) const {
    if (epochs <= 1 || final_step_factor == 1.0) return step_size;
    return step_size * std::pow(final_step_factor,
                                static_cast<double>(epoch) / (epochs - 1));
  }
};

/// Loss summary; total = u + v + s + kl_weight * kl.
struct SveLossTerms {
  double total = 0.0;
  double u = 0.0;
  double v = 0.0;
  double s = 0.0;
  double kl = 0.0;
};

struct TrainingRecord {
  std::vector<double> train_loss;  // per epoch
  std::vector<double> val_loss;    // per epoch, deterministic latent path
  SveLossTerms final_val;
  int best_epoch = -1;
  std::uint64_t seed = 0;
  std::uint64_t dataset_fingerprint = 0;
  int n_train = 0;
  int n_val = 0;
  /// Physical-unit reconstruction RMSE of the velocity heads on the
  /// validation split; used as the model-error part of observation noise.
  double val_recon_u = 0.0;
  double val_recon_v = 0.0;
};

/// Supervised variational encoder: bathymetry (+BCs) to a Gaussian
/// latent, latent (+BCs) to velocities and bathymetry.
class SveModel : public Rom {
 public:
  SveModel(ChannelGeometry geometry, SveArchitecture architecture, Normalization norm,
           FeedForward encoder, FeedForward decoder);

  /// Freshly initialized weights, deterministic per seed.
  static SveModel initialize(const ChannelGeometry& geometry,
                             const SveArchitecture& architecture, const Normalization& norm,
                             std::uint64_t seed);

  [[nodiscard]] std::string kind() const override { return "sve"; }
  [[nodiscard]] int latent_dim() const override { return architecture_.latent_dim; }
  [[nodiscard]] const ChannelGeometry& geometry() const override { return geometry_; }
  [[nodiscard]] const SveArchitecture& architecture() const { return architecture_; }
  [[nodiscard]] const Normalization& normalization() const { return norm_; }
  [[nodiscard]] const FeedForward& encoder() const { return encoder_; }
  [[nodiscard]] const FeedForward& decoder() const { return decoder_; }
  [[nodiscard]] const TrainingRecord& training() const { return training_; }
  void set_training_record(TrainingRecord record) { training_ = std::move(record); }
  [[nodiscard]] VelocityError velocity_model_error() const override {
    return {training_.val_recon_u, training_.val_recon_v};
  }

  [[nodiscard]] LatentGaussian encode(const BathymetryField& bathy,
                                      const BoundaryConditions& bc) const;
  [[nodiscard]] Decoded decode(const Eigen::VectorXd& z,
                               const BoundaryConditions& bc) const override;
  [[nodiscard]] Eigen::MatrixXd decode_bathymetry(const Eigen::VectorXd& z,
                                                  const BoundaryConditions& bc) const override;
  [[nodiscard]] Eigen::MatrixXd velocity_jacobian(const Eigen::VectorXd& z,
                                                  const BoundaryConditions& bc,
                                                  const ObservationMask& mask) const override;
  [[nodiscard]] Eigen::MatrixXd bathymetry_jacobian(
      const Eigen::VectorXd& z, const BoundaryConditions& bc) const override;

  /// Normalized decoder input [z; normalized BCs].
  [[nodiscard]] Eigen::VectorXd decoder_input(const Eigen::VectorXd& z,
                                              const BoundaryConditions& bc) const;

  friend SveModel train_sve(const Dataset& dataset, const SveArchitecture& architecture,
                            const TrainHyper& hyper);

 private:
  ChannelGeometry geometry_;
  SveArchitecture architecture_;
  Normalization norm_;
  FeedForward encoder_;
  FeedForward decoder_;
  TrainingRecord training_;
};

/// z = mu + exp(log_var / 2) .* xi with xi standard normal per seed;
/// kZeroNoiseSeed gives z = mu.
Eigen::VectorXd reparameterize(const LatentGaussian& g, std::uint64_t seed);

/// Loss over the given records. When xi is provided (columns match the
/// batch) the decoder sees the reparameterized latent; otherwise it sees
/// the encoder mean and the loss is deterministic.
SveLossTerms sve_loss(const SveModel& model, const Dataset& dataset,
                      const std::vector<int>& batch,
                      const Eigen::MatrixXd* xi = nullptr);

/// Loss plus reverse-mode parameter gradients in one pass.
SveLossTerms sve_loss_and_grads(const SveModel& model, const Dataset& dataset,
                                const std::vector<int>& batch, const Eigen::MatrixXd* xi,
                                FeedForwardGrads& encoder_grads,
                                FeedForwardGrads& decoder_grads);

/// Offline stage: fits normalization on the training split, trains with
/// adaptive moment-estimated gradient descent, and returns the weight
/// snapshot with the best validation loss. Deterministic per hyper.seed.
SveModel train_sve(const Dataset& dataset, const SveArchitecture& architecture,
                   const TrainHyper& hyper);

/// The deterministic train/validation split used by training: a seeded
/// shuffle with the trailing val_fraction held out.
std::pair<std::vector<int>, std::vector<int>> split_indices(int n_records,
                                                            double val_fraction,
                                                            std::uint64_t seed);

/// Normalization statistics over the listed records.
Normalization fit_normalization(const Dataset& dataset, const std::vector<int>& records);

/// Stable content hash of a dataset's provenance (geometry, record count,
/// metadata); ties a model file to the dataset it was trained on.
std::uint64_t dataset_fingerprint(const Dataset& dataset);

}  // namespace bathyrom

#endif  // BATHYROM_ROM_SVE_HPP
