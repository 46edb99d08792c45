#ifndef BATHYROM_NN_HPP
#define BATHYROM_NN_HPP

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "bathyrom/rng.hpp"

namespace bathyrom {

/// Smooth rectifier and its derivative, stable at both tails.
inline double softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

inline double softplus_prime(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct DenseLayer {
  Eigen::MatrixXd w;  // [out x in]
  Eigen::VectorXd b;  // [out]
};

struct LayerGrads {
  Eigen::MatrixXd dw;
  Eigen::VectorXd db;
};

/// Fully connected trunk with softplus hidden layers, topped by any
/// number of parallel affine heads reading the trunk output. Batches are
/// stored column-wise ([dim x batch]).
struct FeedForward {
  std::vector<DenseLayer> trunk;
  std::vector<DenseLayer> heads;

  /// Fan-in uniform initialization, biases zero, weights drawn in layer
  /// order from the given generator.
  static FeedForward make(int input_dim, const std::vector<int>& trunk_widths,
                          const std::vector<int>& head_dims, Rng& rng);

  [[nodiscard]] int input_dim() const {
    return trunk.empty() ? static_cast<int>(heads.front().w.cols())
                         : static_cast<int>(trunk.front().w.cols());
  }
  [[nodiscard]] int trunk_output_dim() const {
    return trunk.empty() ? input_dim() : static_cast<int>(trunk.back().w.rows());
  }
  [[nodiscard]] std::size_t parameter_count() const;
};

/// Activations cached during a forward pass, consumed by backward().
struct ForwardCache {
  std::vector<Eigen::MatrixXd> pre;         // trunk pre-activations
  std::vector<Eigen::MatrixXd> activations; // [0] = input, then per trunk layer
  std::vector<Eigen::MatrixXd> head_out;
};

ForwardCache forward(const FeedForward& net, const Eigen::MatrixXd& input);

/// Gradient container mirroring a FeedForward's shape.
struct FeedForwardGrads {
  std::vector<LayerGrads> trunk;
  std::vector<LayerGrads> heads;

  static FeedForwardGrads zeros_like(const FeedForward& net);
};

/// Reverse pass. head_grads[h] holds dL/d(head h output); returns
/// dL/d(input) and accumulates parameter gradients into grads.
Eigen::MatrixXd backward(const FeedForward& net, const ForwardCache& cache,
                         const std::vector<Eigen::MatrixXd>& head_grads,
                         FeedForwardGrads& grads);

/// Exact Jacobian-times-tangent through the network at a single input
/// column x: propagates the tangent block T ([input_dim x k]) forward and
/// returns each head's tangent ([head_dim x k]). Equivalent to k
/// forward-mode passes.
std::vector<Eigen::MatrixXd> head_tangents(const FeedForward& net, const Eigen::VectorXd& x,
                                           const Eigen::MatrixXd& tangent);

/// Adaptive moment-estimated gradient descent state for one network.
class Adam {
 public:
  explicit Adam(const FeedForward& net, double step_size = 1e-3, double beta1 = 0.9,
                double beta2 = 0.999, double epsilon = 1e-8);
  void step(FeedForward& net, const FeedForwardGrads& grads);
  void set_step_size(double step_size) { step_size_ = step_size; }

 private:
  double step_size_, beta1_, beta2_, epsilon_;
  long t_ = 0;
  FeedForwardGrads m_, v_;
};

/// Flat parameter views, used by finite-difference gradient checks.
Eigen::VectorXd flatten_parameters(const FeedForward& net);
void unflatten_parameters(FeedForward& net, const Eigen::VectorXd& params);
Eigen::VectorXd flatten_grads(const FeedForwardGrads& grads);

}  // namespace bathyrom

#endif  // BATHYROM_NN_HPP
