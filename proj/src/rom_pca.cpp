#include "bathyrom/rom_pca.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "bathyrom/errors.hpp"
#include "bathyrom/metrics.hpp"

namespace bathyrom {
namespace {

/// Whitening scales sqrt(lambda) with a relative floor so rank-deficient
/// trailing modes cannot blow up the latent.
Eigen::VectorXd whiten_scales(const Eigen::VectorXd& explained_variance) {
  const double floor_value = std::max(explained_variance.size() > 0
                                          ? 1e-12 * explained_variance[0]
                                          : 0.0,
                                      1e-18);
  return explained_variance.unaryExpr(
      [floor_value](double v) { return std::sqrt(std::max(v, floor_value)); });
}

}  // namespace

PcaBasis fit_pca(const Eigen::MatrixXd& samples, int k) {
  const Eigen::Index n = samples.rows(), m = samples.cols();
  if (k < 1 || k > std::min(n, m))
    throw ValidationError("pca: k must lie in [1, min(N, m)]");
  PcaBasis basis;
  basis.mean = samples.colwise().mean();
  const Eigen::MatrixXd centered = samples.rowwise() - basis.mean.transpose();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  basis.components = svd.matrixV().leftCols(k);
  basis.explained_variance =
      svd.singularValues().head(k).array().square() / std::max<double>(1.0, n - 1);
  // Deterministic sign: largest-magnitude entry of each component positive.
  for (int c = 0; c < k; ++c) {
    Eigen::Index peak;
    basis.components.col(c).cwiseAbs().maxCoeff(&peak);
    if (basis.components(peak, c) < 0.0) basis.components.col(c) *= -1.0;
  }
  return basis;
}

PcaRomModel::PcaRomModel(ChannelGeometry geometry, PcaBasis input_basis, PcaBasis basis_u,
                         PcaBasis basis_v, PcaBasis basis_s, PcaRegressor regressor,
                         Normalization norm)
    : geometry_(geometry), k_(static_cast<int>(input_basis.components.cols())),
      input_basis_(std::move(input_basis)), basis_u_(std::move(basis_u)),
      basis_v_(std::move(basis_v)), basis_s_(std::move(basis_s)),
      regressor_(std::move(regressor)), norm_(norm) {
  geometry_.validate();
  const int m = geometry_.node_count();
  for (const PcaBasis* b : {&input_basis_, &basis_u_, &basis_v_, &basis_s_}) {
    if (b->components.rows() != m || b->components.cols() != k_ || b->mean.size() != m)
      throw ValidationError("pca model: basis shapes inconsistent");
  }
  if (regressor_.net.input_dim() != k_ + 2 || regressor_.net.heads.size() != 3)
    throw ValidationError("pca model: regressor shape inconsistent");
}

Eigen::VectorXd PcaRomModel::regressor_input(const Eigen::VectorXd& z,
                                             const BoundaryConditions& bc) const {
  if (z.size() != k_) throw ValidationError("pca decode: latent dimension mismatch");
  Eigen::VectorXd x(k_ + 2);
  x.head(k_) = z;
  x[k_] = norm_.discharge.normalize(bc.discharge);
  x[k_ + 1] = norm_.stage.normalize(bc.downstream_surface);
  return x;
}

std::array<Eigen::VectorXd, 3> PcaRomModel::coefficients(const Eigen::VectorXd& z,
                                                         const BoundaryConditions& bc) const {
  const Eigen::VectorXd x = regressor_input(z, bc);
  const ForwardCache cache = forward(regressor_.net, x);
  return {Eigen::VectorXd(cache.head_out[0].col(0) + regressor_.skip_u * x),
          Eigen::VectorXd(cache.head_out[1].col(0) + regressor_.skip_v * x),
          Eigen::VectorXd(cache.head_out[2].col(0) + regressor_.skip_s * x)};
}

Rom::Decoded PcaRomModel::decode(const Eigen::VectorXd& z,
                                 const BoundaryConditions& bc) const {
  const auto c = coefficients(z, bc);
  auto expand = [&](const PcaBasis& basis, const Eigen::VectorXd& coeff) {
    const Eigen::VectorXd flat =
        basis.mean + basis.components * (whiten_scales(basis.explained_variance).array() *
                                         coeff.array()).matrix();
    return unflatten(flat, geometry_.n_across, geometry_.n_along);
  };
  return Decoded{expand(basis_u_, c[0]), expand(basis_v_, c[1]), expand(basis_s_, c[2])};
}

namespace {

/// d(coefficients)/dz: the regressor head tangents plus the latent block
/// of the skips.
std::array<Eigen::MatrixXd, 3> coefficient_jacobians(const PcaRegressor& reg,
                                                     const Eigen::VectorXd& x, int k) {
  Eigen::MatrixXd t0 = Eigen::MatrixXd::Zero(x.size(), k);
  t0.topLeftCorner(k, k).setIdentity();
  auto tangents = head_tangents(reg.net, x, t0);
  return {Eigen::MatrixXd(tangents[0] + reg.skip_u.leftCols(k)),
          Eigen::MatrixXd(tangents[1] + reg.skip_v.leftCols(k)),
          Eigen::MatrixXd(tangents[2] + reg.skip_s.leftCols(k))};
}

}  // namespace

Eigen::MatrixXd PcaRomModel::velocity_jacobian(const Eigen::VectorXd& z,
                                               const BoundaryConditions& bc,
                                               const ObservationMask& mask) const {
  mask.check_bounds(geometry_);
  const Eigen::VectorXd x = regressor_input(z, bc);
  const auto dc = coefficient_jacobians(regressor_, x, k_);
  const Eigen::MatrixXd ju_full =
      basis_u_.components * whiten_scales(basis_u_.explained_variance).asDiagonal() * dc[0];
  const Eigen::MatrixXd jv_full =
      basis_v_.components * whiten_scales(basis_v_.explained_variance).asDiagonal() * dc[1];
  const int nl = geometry_.n_along;
  Eigen::MatrixXd j(static_cast<Eigen::Index>(mask.value_count()), k_);
  Eigen::Index row = 0;
  if (mask.includes_u)
    for (const auto& [r, c] : mask.indices) j.row(row++) = ju_full.row(r * nl + c);
  if (mask.includes_v)
    for (const auto& [r, c] : mask.indices) j.row(row++) = jv_full.row(r * nl + c);
  return j;
}

Eigen::MatrixXd PcaRomModel::bathymetry_jacobian(const Eigen::VectorXd& z,
                                                 const BoundaryConditions& bc) const {
  const Eigen::VectorXd x = regressor_input(z, bc);
  const auto dc = coefficient_jacobians(regressor_, x, k_);
  return basis_s_.components * whiten_scales(basis_s_.explained_variance).asDiagonal() *
         dc[2];
}

Eigen::VectorXd PcaRomModel::project(const BathymetryField& bathy) const {
  if (bathy.geometry != geometry_)
    throw ValidationError("pca project: geometry does not match the model");
  const Eigen::VectorXd centered = flatten(bathy.bed_elevation) - input_basis_.mean;
  return (input_basis_.components.transpose() * centered).array() /
         whiten_scales(input_basis_.explained_variance).array();
}

namespace {

struct PcaBatch {
  Eigen::MatrixXd input;                 // [k+2 x B]
  Eigen::MatrixXd cu, cv, cs;            // whitened target coefficients [k x B]
};

struct Projector {
  Eigen::MatrixXd weights;  // [k x m]: diag(1/sqrt(lambda)) C^T
  Eigen::VectorXd mean;

  Eigen::VectorXd apply(const Eigen::VectorXd& flat) const {
    return weights * (flat - mean);
  }
};

Projector make_projector(const PcaBasis& basis) {
  return {whiten_scales(basis.explained_variance).cwiseInverse().asDiagonal() *
              basis.components.transpose(),
          basis.mean};
}

}  // namespace

PcaRomModel init_pca_rom(const Dataset& dataset, int k, const PcaHyper& hyper) {
  dataset.validate();
  const auto [train_idx, val_idx] =
      split_indices(static_cast<int>(dataset.records.size()), hyper.base.val_fraction,
                    hyper.base.seed);
  const Normalization norm = fit_normalization(dataset, train_idx);
  const int m = dataset.geometry.node_count();

  auto samples_of = [&](auto&& get) {
    Eigen::MatrixXd s(static_cast<Eigen::Index>(train_idx.size()), m);
    for (std::size_t r = 0; r < train_idx.size(); ++r)
      s.row(static_cast<Eigen::Index>(r)) =
          flatten(get(dataset.records[static_cast<std::size_t>(train_idx[r])])).transpose();
    return s;
  };
  PcaBasis input_basis = fit_pca(
      samples_of([](const DatasetRecord& r) -> const Eigen::MatrixXd& { return r.bathymetry; }),
      k);
  PcaBasis basis_u = fit_pca(
      samples_of([](const DatasetRecord& r) -> const Eigen::MatrixXd& { return r.u; }), k);
  PcaBasis basis_v = fit_pca(
      samples_of([](const DatasetRecord& r) -> const Eigen::MatrixXd& { return r.v; }), k);
  PcaBasis basis_s = input_basis;

  Rng rng = Rng(hyper.base.seed).fork(0xbca);
  PcaRegressor reg;
  reg.net = FeedForward::make(k + 2, hyper.regressor_widths, {k, k, k}, rng);
  for (auto& head : reg.net.heads) head.w.setZero();  // skips carry the initial map
  reg.skip_u = Eigen::MatrixXd::Zero(k, k + 2);
  reg.skip_v = Eigen::MatrixXd::Zero(k, k + 2);
  reg.skip_s = Eigen::MatrixXd::Zero(k, k + 2);
  reg.skip_s.leftCols(k).setIdentity();

  return PcaRomModel(dataset.geometry, std::move(input_basis), std::move(basis_u),
                     std::move(basis_v), std::move(basis_s), std::move(reg), norm);
}

class PcaTrainer {
 public:
  static PcaRomModel train(const Dataset& dataset, int k, const PcaHyper& hyper) {
    hyper.base.validate();
    const int n = static_cast<int>(dataset.records.size());
    if (n < 2 * hyper.base.batch_size)
      throw ValidationError("training: dataset must hold at least 2 x batch_size records");
    PcaRomModel model = init_pca_rom(dataset, k, hyper);
    auto [train_idx, val_idx] = split_indices(n, hyper.base.val_fraction, hyper.base.seed);

    const Projector proj_in = make_projector(model.input_basis_);
    const Projector proj_u = make_projector(model.basis_u_);
    const Projector proj_v = make_projector(model.basis_v_);
    const Projector proj_s = make_projector(model.basis_s_);
    auto batch_of = [&](const std::vector<int>& records) {
      PcaBatch b;
      const auto cols = static_cast<Eigen::Index>(records.size());
      b.input.resize(k + 2, cols);
      b.cu.resize(k, cols);
      b.cv.resize(k, cols);
      b.cs.resize(k, cols);
      for (Eigen::Index c = 0; c < cols; ++c) {
        const auto& rec = dataset.records[static_cast<std::size_t>(records[c])];
        b.input.col(c).head(k) = proj_in.apply(flatten(rec.bathymetry));
        b.input(k, c) = model.norm_.discharge.normalize(rec.bc.discharge);
        b.input(k + 1, c) = model.norm_.stage.normalize(rec.bc.downstream_surface);
        b.cu.col(c) = proj_u.apply(flatten(rec.u));
        b.cv.col(c) = proj_v.apply(flatten(rec.v));
        b.cs.col(c) = proj_s.apply(flatten(rec.bathymetry));
      }
      return b;
    };

    auto loss_of = [&](const PcaBatch& b, FeedForwardGrads* grads,
                       std::array<Eigen::MatrixXd, 3>* skip_grads) {
      const ForwardCache cache = forward(model.regressor_.net, b.input);
      std::array<Eigen::MatrixXd, 3> out{
          cache.head_out[0] + model.regressor_.skip_u * b.input,
          cache.head_out[1] + model.regressor_.skip_v * b.input,
          cache.head_out[2] + model.regressor_.skip_s * b.input};
      const std::array<const Eigen::MatrixXd*, 3> target{&b.cu, &b.cv, &b.cs};
      const double scale = static_cast<double>(b.cu.size());
      double loss = 0.0;
      std::vector<Eigen::MatrixXd> head_grads;
      for (int h = 0; h < 3; ++h) {
        const Eigen::MatrixXd resid = out[static_cast<std::size_t>(h)] - *target[static_cast<std::size_t>(h)];
        loss += resid.squaredNorm() / scale;
        if (grads != nullptr) head_grads.push_back(2.0 / scale * resid);
      }
      if (grads != nullptr && skip_grads != nullptr) {
        backward(model.regressor_.net, cache, head_grads, *grads);
        for (int h = 0; h < 3; ++h)
          (*skip_grads)[static_cast<std::size_t>(h)] =
              head_grads[static_cast<std::size_t>(h)] * b.input.transpose();
      }
      return loss;
    };

    TrainingRecord record;
    record.seed = hyper.base.seed;
    record.dataset_fingerprint = dataset_fingerprint(dataset);
    record.n_train = static_cast<int>(train_idx.size());
    record.n_val = static_cast<int>(val_idx.size());

    Adam opt(model.regressor_.net, hyper.base.step_size);
    std::array<Eigen::MatrixXd, 3> skip_m, skip_v_state;
    for (auto& s : skip_m) s = Eigen::MatrixXd::Zero(k, k + 2);
    for (auto& s : skip_v_state) s = Eigen::MatrixXd::Zero(k, k + 2);
    long adam_t = 0;

    PcaRegressor best = model.regressor_;
    double best_val = std::numeric_limits<double>::infinity();
    const PcaBatch val_batch = val_idx.empty() ? PcaBatch{} : batch_of(val_idx);
    Rng shuffle_rng = Rng(hyper.base.seed).fork(0x9cab);

    for (int epoch = 0; epoch < hyper.base.epochs; ++epoch) {
      const double step = hyper.base.step_at(epoch);
      opt.set_step_size(step);
      std::vector<int> order = train_idx;
      for (int i = static_cast<int>(order.size()) - 1; i > 0; --i) {
        const auto j =
            static_cast<int>(shuffle_rng.next_u64() % static_cast<std::uint64_t>(i + 1));
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
      }
      double epoch_loss = 0.0;
      std::size_t seen = 0;
      for (std::size_t start = 0; start < order.size(); start += hyper.base.batch_size) {
        const std::size_t stop = std::min(order.size(), start + hyper.base.batch_size);
        const std::vector<int> batch_idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(stop));
        const PcaBatch batch = batch_of(batch_idx);
        FeedForwardGrads grads = FeedForwardGrads::zeros_like(model.regressor_.net);
        std::array<Eigen::MatrixXd, 3> skip_grads;
        const double loss = loss_of(batch, &grads, &skip_grads);
        if (!std::isfinite(loss))
          throw NumericsError("training diverged at epoch " + std::to_string(epoch));
        opt.step(model.regressor_.net, grads);
        ++adam_t;
        const double bias1 = 1.0 - std::pow(0.9, static_cast<double>(adam_t));
        const double bias2 = 1.0 - std::pow(0.999, static_cast<double>(adam_t));
        std::array<Eigen::MatrixXd*, 3> skips{&model.regressor_.skip_u,
                                              &model.regressor_.skip_v,
                                              &model.regressor_.skip_s};
        for (int h = 0; h < 3; ++h) {
          auto& mm = skip_m[static_cast<std::size_t>(h)];
          auto& vv = skip_v_state[static_cast<std::size_t>(h)];
          const auto& g = skip_grads[static_cast<std::size_t>(h)];
          mm = 0.9 * mm + 0.1 * g;
          vv = (0.999 * vv.array() + 0.001 * g.array().square()).matrix();
          skips[static_cast<std::size_t>(h)]->array() -=
              step * (mm.array() / bias1) / ((vv.array() / bias2).sqrt() + 1e-8);
        }
        epoch_loss += loss * static_cast<double>(batch_idx.size());
        seen += batch_idx.size();
      }
      record.train_loss.push_back(epoch_loss / static_cast<double>(seen));
      if (!val_idx.empty()) {
        const double val = loss_of(val_batch, nullptr, nullptr);
        record.val_loss.push_back(val);
        if (val < best_val) {
          best_val = val;
          best = model.regressor_;
          record.best_epoch = epoch;
          record.final_val.total = val;
        }
      } else {
        record.val_loss.push_back(record.train_loss.back());
        best = model.regressor_;
        record.best_epoch = epoch;
      }
    }
    model.regressor_ = std::move(best);
    if (!val_idx.empty()) {
      double sum_u = 0.0, sum_v = 0.0;
      for (int r : val_idx) {
        const auto& rec = dataset.records[static_cast<std::size_t>(r)];
        const Eigen::VectorXd z =
            model.project(BathymetryField{dataset.geometry, rec.bathymetry});
        const Rom::Decoded d = model.decode(z, rec.bc);
        sum_u += grid_rmse(d.u, rec.u);
        sum_v += grid_rmse(d.v, rec.v);
      }
      record.val_recon_u = sum_u / static_cast<double>(val_idx.size());
      record.val_recon_v = sum_v / static_cast<double>(val_idx.size());
    }
    model.set_training_record(std::move(record));
    return model;
  }
};

PcaRomModel train_pca_rom(const Dataset& dataset, int k, const PcaHyper& hyper) {
  return PcaTrainer::train(dataset, k, hyper);
}

}  // namespace bathyrom
