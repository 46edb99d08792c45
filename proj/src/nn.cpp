#include "bathyrom/nn.hpp"

#include "bathyrom/errors.hpp"

namespace bathyrom {
namespace {

DenseLayer make_layer(int out_dim, int in_dim, Rng& rng) {
  DenseLayer layer;
  layer.w.resize(out_dim, in_dim);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
  for (int r = 0; r < out_dim; ++r)
    for (int c = 0; c < in_dim; ++c) layer.w(r, c) = rng.uniform(-bound, bound);
  layer.b = Eigen::VectorXd::Zero(out_dim);
  return layer;
}

Eigen::MatrixXd affine(const DenseLayer& layer, const Eigen::MatrixXd& x) {
  return (layer.w * x).colwise() + layer.b;
}

}  // namespace

FeedForward FeedForward::make(int input_dim, const std::vector<int>& trunk_widths,
                              const std::vector<int>& head_dims, Rng& rng) {
  if (input_dim < 1) throw ValidationError("network: input dimension must be positive");
  if (head_dims.empty()) throw ValidationError("network: at least one head required");
  FeedForward net;
  int prev = input_dim;
  for (int width : trunk_widths) {
    if (width < 1) throw ValidationError("network: layer widths must be positive");
    net.trunk.push_back(make_layer(width, prev, rng));
    prev = width;
  }
  for (int dim : head_dims) {
    if (dim < 1) throw ValidationError("network: head dimensions must be positive");
    net.heads.push_back(make_layer(dim, prev, rng));
  }
  return net;
}

std::size_t FeedForward::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : trunk) n += static_cast<std::size_t>(l.w.size()) + l.b.size();
  for (const auto& l : heads) n += static_cast<std::size_t>(l.w.size()) + l.b.size();
  return n;
}

ForwardCache forward(const FeedForward& net, const Eigen::MatrixXd& input) {
  if (input.rows() != net.input_dim())
    throw ValidationError("network: input dimension mismatch");
  ForwardCache cache;
  cache.activations.push_back(input);
  for (const auto& layer : net.trunk) {
    cache.pre.push_back(affine(layer, cache.activations.back()));
    cache.activations.push_back(
        cache.pre.back().unaryExpr([](double x) { return softplus(x); }));
  }
  cache.head_out.reserve(net.heads.size());
  for (const auto& head : net.heads)
    cache.head_out.push_back(affine(head, cache.activations.back()));
  return cache;
}

FeedForwardGrads FeedForwardGrads::zeros_like(const FeedForward& net) {
  FeedForwardGrads g;
  for (const auto& l : net.trunk)
    g.trunk.push_back({Eigen::MatrixXd::Zero(l.w.rows(), l.w.cols()),
                       Eigen::VectorXd::Zero(l.b.size())});
  for (const auto& l : net.heads)
    g.heads.push_back({Eigen::MatrixXd::Zero(l.w.rows(), l.w.cols()),
                       Eigen::VectorXd::Zero(l.b.size())});
  return g;
}

Eigen::MatrixXd backward(const FeedForward& net, const ForwardCache& cache,
                         const std::vector<Eigen::MatrixXd>& head_grads,
                         FeedForwardGrads& grads) {
  if (head_grads.size() != net.heads.size())
    throw ValidationError("network: head gradient count mismatch");
  const Eigen::MatrixXd& trunk_out = cache.activations.back();
  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(trunk_out.rows(), trunk_out.cols());
  for (std::size_t h = 0; h < net.heads.size(); ++h) {
    grads.heads[h].dw += head_grads[h] * trunk_out.transpose();
    grads.heads[h].db += head_grads[h].rowwise().sum();
    delta.noalias() += net.heads[h].w.transpose() * head_grads[h];
  }
  for (int l = static_cast<int>(net.trunk.size()) - 1; l >= 0; --l) {
    const Eigen::MatrixXd dz =
        delta.array() *
        cache.pre[static_cast<std::size_t>(l)].unaryExpr([](double x) {
          return softplus_prime(x);
        }).array();
    grads.trunk[static_cast<std::size_t>(l)].dw +=
        dz * cache.activations[static_cast<std::size_t>(l)].transpose();
    grads.trunk[static_cast<std::size_t>(l)].db += dz.rowwise().sum();
    delta = net.trunk[static_cast<std::size_t>(l)].w.transpose() * dz;
  }
  return delta;
}

std::vector<Eigen::MatrixXd> head_tangents(const FeedForward& net, const Eigen::VectorXd& x,
                                           const Eigen::MatrixXd& tangent) {
  if (tangent.rows() != net.input_dim())
    throw ValidationError("network: tangent dimension mismatch");
  Eigen::VectorXd value = x;
  Eigen::MatrixXd t = tangent;
  for (const auto& layer : net.trunk) {
    const Eigen::VectorXd pre = layer.w * value + layer.b;
    t = layer.w * t;
    const Eigen::VectorXd slope = pre.unaryExpr([](double p) { return softplus_prime(p); });
    t.array().colwise() *= slope.array();
    value = pre.unaryExpr([](double p) { return softplus(p); });
  }
  std::vector<Eigen::MatrixXd> out;
  out.reserve(net.heads.size());
  for (const auto& head : net.heads) out.push_back(head.w * t);
  return out;
}

Adam::Adam(const FeedForward& net, double step_size, double beta1, double beta2,
           double epsilon)
    : step_size_(step_size), beta1_(beta1), beta2_(beta2), epsilon_(epsilon),
      m_(FeedForwardGrads::zeros_like(net)), v_(FeedForwardGrads::zeros_like(net)) {}

void Adam::step(FeedForward& net, const FeedForwardGrads& grads) {
  ++t_;
  const double bias1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bias2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto apply = [&](auto& param, const auto& grad, auto& m, auto& v) {
    m = beta1_ * m + (1.0 - beta1_) * grad;
    v = (beta2_ * v.array() + (1.0 - beta2_) * grad.array().square()).matrix();
    param.array() -=
        step_size_ * (m.array() / bias1) / ((v.array() / bias2).sqrt() + epsilon_);
  };
  auto apply_layer = [&](DenseLayer& layer, const LayerGrads& g, LayerGrads& m,
                         LayerGrads& v) {
    apply(layer.w, g.dw, m.dw, v.dw);
    apply(layer.b, g.db, m.db, v.db);
  };
  for (std::size_t l = 0; l < net.trunk.size(); ++l)
    apply_layer(net.trunk[l], grads.trunk[l], m_.trunk[l], v_.trunk[l]);
  for (std::size_t h = 0; h < net.heads.size(); ++h)
    apply_layer(net.heads[h], grads.heads[h], m_.heads[h], v_.heads[h]);
}

Eigen::VectorXd flatten_parameters(const FeedForward& net) {
  std::vector<double> out;
  auto push = [&out](const DenseLayer& l) {
    out.insert(out.end(), l.w.data(), l.w.data() + l.w.size());
    out.insert(out.end(), l.b.data(), l.b.data() + l.b.size());
  };
  for (const auto& l : net.trunk) push(l);
  for (const auto& l : net.heads) push(l);
  return Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size()));
}

void unflatten_parameters(FeedForward& net, const Eigen::VectorXd& params) {
  Eigen::Index pos = 0;
  auto pull = [&](DenseLayer& l) {
    for (Eigen::Index i = 0; i < l.w.size(); ++i) l.w.data()[i] = params[pos++];
    for (Eigen::Index i = 0; i < l.b.size(); ++i) l.b[i] = params[pos++];
  };
  for (auto& l : net.trunk) pull(l);
  for (auto& l : net.heads) pull(l);
  if (pos != params.size())
    throw ValidationError("network: parameter vector length mismatch");
}

Eigen::VectorXd flatten_grads(const FeedForwardGrads& grads) {
  std::vector<double> out;
  auto push = [&out](const LayerGrads& g) {
    out.insert(out.end(), g.dw.data(), g.dw.data() + g.dw.size());
    out.insert(out.end(), g.db.data(), g.db.data() + g.db.size());
  };
  for (const auto& g : grads.trunk) push(g);
  for (const auto& g : grads.heads) push(g);
  return Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size()));
}

}  // namespace bathyrom
