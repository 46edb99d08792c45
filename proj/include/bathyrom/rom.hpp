#ifndef BATHYROM_ROM_HPP
#define BATHYROM_ROM_HPP

#include <Eigen/Dense>
#include <memory>
#include <string>

#include "bathyrom/fields.hpp"
#include "bathyrom/mask.hpp"

namespace bathyrom {

/// Scalar normalization of one field or BC component.
struct FieldNorm {
  double mean = 0.0;
  double std = 1.0;

  [[nodiscard]] double normalize(double x) const { return (x - mean) / std; }
  [[nodiscard]] double denormalize(double x) const { return x * std + mean; }
};

/// Surrogate velocity error per component (m/s), estimated on the
/// validation split at training time. Observation noise levels for
/// simulator data combine this with the instrument noise, since the
/// misfit noise term covers observation and model uncertainty together.
struct VelocityError {
  double u = 0.0;
  double v = 0.0;
};

/// Latent-to-fields surrogate shared by the encoder and PCA variants.
/// Implementations are immutable after construction/training and safe to
/// share across threads.
class Rom {
 public:
  struct Decoded {
    Eigen::MatrixXd u;  // m/s, physical units
    Eigen::MatrixXd v;
    Eigen::MatrixXd s;  // bed elevation, m
  };

  virtual ~Rom() = default;

  /// Zero for a perfect surrogate (and for data the model itself
  /// generated); trained models report their validation error.
  [[nodiscard]] virtual VelocityError velocity_model_error() const { return {}; }

  [[nodiscard]] virtual std::string kind() const = 0;
  [[nodiscard]] virtual int latent_dim() const = 0;
  [[nodiscard]] virtual const ChannelGeometry& geometry() const = 0;

  [[nodiscard]] virtual Decoded decode(const Eigen::VectorXd& z,
                                       const BoundaryConditions& bc) const = 0;

  /// Only the bathymetry head; cheaper when velocities are not needed.
  [[nodiscard]] virtual Eigen::MatrixXd decode_bathymetry(const Eigen::VectorXd& z,
                                                          const BoundaryConditions& bc) const {
    return decode(z, bc).s;
  }

  /// Exact Jacobian of the masked velocity observation vector with
  /// respect to z, rows ordered like apply_mask (all u, then all v).
  [[nodiscard]] virtual Eigen::MatrixXd velocity_jacobian(
      const Eigen::VectorXd& z, const BoundaryConditions& bc,
      const ObservationMask& mask) const = 0;

  /// Exact Jacobian of the flattened bathymetry head with respect to z.
  [[nodiscard]] virtual Eigen::MatrixXd bathymetry_jacobian(
      const Eigen::VectorXd& z, const BoundaryConditions& bc) const = 0;
};

/// Decoded velocities restricted to the mask, in observation order.
Eigen::VectorXd predict_observations(const Rom& model, const Eigen::VectorXd& z,
                                     const BoundaryConditions& bc,
                                     const ObservationMask& mask);

}  // namespace bathyrom

#endif  // BATHYROM_ROM_HPP
