#ifndef BATHYROM_ROM_PCA_HPP
#define BATHYROM_ROM_PCA_HPP

#include <cstdint>
#include <vector>

#include "bathyrom/dataset.hpp"
#include "bathyrom/nn.hpp"
#include "bathyrom/rom.hpp"
#include "bathyrom/rom_sve.hpp"

namespace bathyrom {

/// Principal components of one flattened field family.
struct PcaBasis {
  Eigen::VectorXd mean;                // [m]
  Eigen::MatrixXd components;          // [m x k], orthonormal columns
  Eigen::VectorXd explained_variance;  // [k], descending
};

/// Top-k principal components of the row-wise samples [N x m]. Component
/// signs are fixed so the largest-magnitude entry of each column is
/// positive.
PcaBasis fit_pca(const Eigen::MatrixXd& samples, int k);

/// Dense regressor between whitened latent coefficients and whitened
/// output coefficients, with a linear skip so the affine part is exact at
/// initialization: c_h(x) = skip_h x + head_h(trunk(x)).
struct PcaRegressor {
  FeedForward net;  // trunk (possibly empty) + heads {u, v, s}
  Eigen::MatrixXd skip_u, skip_v, skip_s;  // [k x input_dim]
};

/// Linear-dimension-reduction baseline: PCA bases for bathymetry and each
/// output field, a small dense regressor between whitened coefficients.
/// The latent variable is the whitened bathymetry projection, so the
/// identity-covariance latent prior matches the encoder ROM's.
class PcaRomModel : public Rom {
 public:
  PcaRomModel(ChannelGeometry geometry, PcaBasis input_basis, PcaBasis basis_u,
              PcaBasis basis_v, PcaBasis basis_s, PcaRegressor regressor,
              Normalization norm);

  [[nodiscard]] std::string kind() const override { return "pca"; }
  [[nodiscard]] int latent_dim() const override { return k_; }
  [[nodiscard]] const ChannelGeometry& geometry() const override { return geometry_; }

  [[nodiscard]] Decoded decode(const Eigen::VectorXd& z,
                               const BoundaryConditions& bc) const override;
  [[nodiscard]] Eigen::MatrixXd velocity_jacobian(const Eigen::VectorXd& z,
                                                  const BoundaryConditions& bc,
                                                  const ObservationMask& mask) const override;
  [[nodiscard]] Eigen::MatrixXd bathymetry_jacobian(
      const Eigen::VectorXd& z, const BoundaryConditions& bc) const override;

  /// Whitened projection of a bathymetry onto the input basis.
  [[nodiscard]] Eigen::VectorXd project(const BathymetryField& bathy) const;

  [[nodiscard]] const PcaBasis& input_basis() const { return input_basis_; }
  [[nodiscard]] const PcaBasis& output_basis_u() const { return basis_u_; }
  [[nodiscard]] const PcaBasis& output_basis_v() const { return basis_v_; }
  [[nodiscard]] const PcaBasis& output_basis_s() const { return basis_s_; }
  [[nodiscard]] const PcaRegressor& regressor() const { return regressor_; }
  [[nodiscard]] const Normalization& normalization() const { return norm_; }
  [[nodiscard]] const TrainingRecord& training() const { return training_; }
  void set_training_record(TrainingRecord record) { training_ = std::move(record); }
  [[nodiscard]] VelocityError velocity_model_error() const override {
    return {training_.val_recon_u, training_.val_recon_v};
  }

  /// Whitened regressor outputs (c_u, c_v, c_s) at [z; normalized bc].
  [[nodiscard]] std::array<Eigen::VectorXd, 3> coefficients(
      const Eigen::VectorXd& z, const BoundaryConditions& bc) const;

  friend class PcaTrainer;

 private:
  [[nodiscard]] Eigen::VectorXd regressor_input(const Eigen::VectorXd& z,
                                                const BoundaryConditions& bc) const;

  ChannelGeometry geometry_;
  int k_;
  PcaBasis input_basis_, basis_u_, basis_v_, basis_s_;
  PcaRegressor regressor_;
  Normalization norm_;
  TrainingRecord training_;
};

struct PcaHyper {
  TrainHyper base;
  std::vector<int> regressor_widths{32};
};

/// Fits the four bases on the training split, then trains the regressor
/// on whitened coefficients with the same optimizer and split handling as
/// the encoder ROM. Deterministic per seed.
PcaRomModel train_pca_rom(const Dataset& dataset, int k, const PcaHyper& hyper);

/// A freshly initialized (untrained) model over the given dataset: bases
/// fitted, regressor at its identity initialization, so decoding a
/// projected sample reproduces that sample's PCA reconstruction.
PcaRomModel init_pca_rom(const Dataset& dataset, int k, const PcaHyper& hyper);

}  // namespace bathyrom

#endif  // BATHYROM_ROM_PCA_HPP
