#include "bathyrom/rom_sve.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "bathyrom/errors.hpp"
#include "bathyrom/metrics.hpp"

namespace bathyrom {

void SveArchitecture::validate() const {
  if (latent_dim < 1) throw ValidationError("architecture: latent_dim must be >= 1");
  for (int w : encoder_widths)
    if (w < 1) throw ValidationError("architecture: encoder widths must be >= 1");
  for (int w : decoder_widths)
    if (w < 1) throw ValidationError("architecture: decoder widths must be >= 1");
  if (kl_weight < 0.0) throw ValidationError("architecture: kl_weight must be >= 0");
}

void TrainHyper::validate() const {
  if (epochs < 0) throw ValidationError("training: epochs must be >= 0");
  if (batch_size < 1) throw ValidationError("training: batch_size must be >= 1");
  if (!(step_size > 0.0)) throw ValidationError("training: step_size must be positive");
  if (!(final_step_factor > 0.0) || final_step_factor > 1.0)
    throw ValidationError("training: final_step_factor must lie in (0, 1]");
  if (val_fraction < 0.0 || val_fraction >= 1.0)
    throw ValidationError("training: val_fraction must lie in [0, 1)");
}

SveModel::SveModel(ChannelGeometry geometry, SveArchitecture architecture, Normalization norm,
                   FeedForward encoder, FeedForward decoder)
    : geometry_(geometry), architecture_(std::move(architecture)), norm_(norm),
      encoder_(std::move(encoder)), decoder_(std::move(decoder)) {
  geometry_.validate();
  architecture_.validate();
  const int m = geometry_.node_count();
  const int bc_dims = architecture_.bc_embedding ? 2 : 0;
  if (encoder_.input_dim() != m + bc_dims)
    throw ValidationError("model: encoder input does not match geometry");
  if (decoder_.input_dim() != architecture_.latent_dim + bc_dims)
    throw ValidationError("model: decoder input does not match latent dimension");
  if (encoder_.heads.size() != 2 || decoder_.heads.size() != 3)
    throw ValidationError("model: expected 2 encoder heads and 3 decoder heads");
}

SveModel SveModel::initialize(const ChannelGeometry& geometry,
                              const SveArchitecture& architecture, const Normalization& norm,
                              std::uint64_t seed) {
  architecture.validate();
  const int m = geometry.node_count();
  const int bc_dims = architecture.bc_embedding ? 2 : 0;
  Rng rng = Rng(seed).fork(0x5e1f);
  FeedForward encoder = FeedForward::make(
      m + bc_dims, architecture.encoder_widths,
      {architecture.latent_dim, architecture.latent_dim}, rng);
  // Start the latent nearly deterministic (std ~ e^-2) so reconstruction
  // gradients are not drowned in reparameterization noise; the KL term
  // pulls the variance back up as training settles.
  encoder.heads[1].b.setConstant(-4.0);
  FeedForward decoder = FeedForward::make(architecture.latent_dim + bc_dims,
                                          architecture.decoder_widths, {m, m, m}, rng);
  return SveModel(geometry, architecture, norm, std::move(encoder), std::move(decoder));
}

namespace {

Eigen::Vector2d normalized_bc(const Normalization& norm, const BoundaryConditions& bc) {
  return {norm.discharge.normalize(bc.discharge), norm.stage.normalize(bc.downstream_surface)};
}

}  // namespace

LatentGaussian SveModel::encode(const BathymetryField& bathy,
                                const BoundaryConditions& bc) const {
  if (bathy.geometry != geometry_)
    throw ValidationError("encode: geometry does not match the model");
  const int m = geometry_.node_count();
  Eigen::VectorXd input(encoder_.input_dim());
  const Eigen::VectorXd flat = flatten(bathy.bed_elevation);
  for (int i = 0; i < m; ++i) input[i] = norm_.s.normalize(flat[i]);
  if (architecture_.bc_embedding) input.tail<2>() = normalized_bc(norm_, bc);
  const ForwardCache cache = forward(encoder_, input);
  return LatentGaussian{cache.head_out[0].col(0), cache.head_out[1].col(0)};
}

Eigen::VectorXd SveModel::decoder_input(const Eigen::VectorXd& z,
                                        const BoundaryConditions& bc) const {
  if (z.size() != architecture_.latent_dim)
    throw ValidationError("decode: latent dimension mismatch");
  Eigen::VectorXd input(decoder_.input_dim());
  input.head(z.size()) = z;
  if (architecture_.bc_embedding) input.tail<2>() = normalized_bc(norm_, bc);
  return input;
}

Rom::Decoded SveModel::decode(const Eigen::VectorXd& z, const BoundaryConditions& bc) const {
  const ForwardCache cache = forward(decoder_, decoder_input(z, bc));
  const int na = geometry_.n_across, nl = geometry_.n_along;
  auto denorm = [&](const Eigen::MatrixXd& out, const FieldNorm& f) {
    Eigen::VectorXd col = out.col(0);
    for (Eigen::Index i = 0; i < col.size(); ++i) col[i] = f.denormalize(col[i]);
    return unflatten(col, na, nl);
  };
  return Decoded{denorm(cache.head_out[0], norm_.u), denorm(cache.head_out[1], norm_.v),
                 denorm(cache.head_out[2], norm_.s)};
}

Eigen::MatrixXd SveModel::decode_bathymetry(const Eigen::VectorXd& z,
                                            const BoundaryConditions& bc) const {
  // Trunk plus the bathymetry head only.
  Eigen::VectorXd value = decoder_input(z, bc);
  for (const auto& layer : decoder_.trunk)
    value = (layer.w * value + layer.b).unaryExpr([](double p) { return softplus(p); });
  Eigen::VectorXd s = decoder_.heads[2].w * value + decoder_.heads[2].b;
  for (Eigen::Index i = 0; i < s.size(); ++i) s[i] = norm_.s.denormalize(s[i]);
  return unflatten(s, geometry_.n_across, geometry_.n_along);
}

namespace {

/// Trunk output and its tangent with respect to the leading latent block
/// of the decoder input.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> trunk_tangent(const FeedForward& net,
                                                          const Eigen::VectorXd& input,
                                                          int latent_dim) {
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(input.size(), latent_dim);
  t.topLeftCorner(latent_dim, latent_dim).setIdentity();
  Eigen::VectorXd value = input;
  for (const auto& layer : net.trunk) {
    const Eigen::VectorXd pre = layer.w * value + layer.b;
    t = layer.w * t;
    const Eigen::VectorXd slope = pre.unaryExpr([](double p) { return softplus_prime(p); });
    t.array().colwise() *= slope.array();
    value = pre.unaryExpr([](double p) { return softplus(p); });
  }
  return {std::move(value), std::move(t)};
}

}  // namespace

Eigen::MatrixXd SveModel::velocity_jacobian(const Eigen::VectorXd& z,
                                            const BoundaryConditions& bc,
                                            const ObservationMask& mask) const {
  mask.check_bounds(geometry_);
  const auto [_, t] = trunk_tangent(decoder_, decoder_input(z, bc), architecture_.latent_dim);
  const int nl = geometry_.n_along;
  const auto n_pts = static_cast<Eigen::Index>(mask.indices.size());
  const Eigen::Index n_rows = static_cast<Eigen::Index>(mask.value_count());
  Eigen::MatrixXd j(n_rows, architecture_.latent_dim);
  Eigen::Index row = 0;
  if (mask.includes_u) {
    for (Eigen::Index p = 0; p < n_pts; ++p) {
      const auto& [r, c] = mask.indices[static_cast<std::size_t>(p)];
      j.row(row++) = norm_.u.std * (decoder_.heads[0].w.row(r * nl + c) * t);
    }
  }
  if (mask.includes_v) {
    for (Eigen::Index p = 0; p < n_pts; ++p) {
      const auto& [r, c] = mask.indices[static_cast<std::size_t>(p)];
      j.row(row++) = norm_.v.std * (decoder_.heads[1].w.row(r * nl + c) * t);
    }
  }
  return j;
}

Eigen::MatrixXd SveModel::bathymetry_jacobian(const Eigen::VectorXd& z,
                                              const BoundaryConditions& bc) const {
  const auto [_, t] = trunk_tangent(decoder_, decoder_input(z, bc), architecture_.latent_dim);
  return norm_.s.std * (decoder_.heads[2].w * t);
}

Eigen::VectorXd reparameterize(const LatentGaussian& g, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::VectorXd z(g.mu.size());
  for (Eigen::Index i = 0; i < z.size(); ++i)
    z[i] = g.mu[i] + std::exp(0.5 * g.log_var[i]) * rng.normal();
  return z;
}

namespace {

struct BatchData {
  Eigen::MatrixXd enc_input;  // [m(+2) x B]
  Eigen::MatrixXd bc_rows;    // [2 x B] normalized
  Eigen::MatrixXd target_u, target_v, target_s;  // [m x B] normalized
};

BatchData assemble_batch(const SveModel& model, const Dataset& dataset,
                         const std::vector<int>& batch) {
  if (batch.empty()) throw ValidationError("loss: empty batch");
  const auto& norm = model.normalization();
  const auto& g = model.geometry();
  const int m = g.node_count();
  const auto b = static_cast<Eigen::Index>(batch.size());
  const bool bc_embed = model.architecture().bc_embedding;
  BatchData data;
  data.enc_input.resize(m + (bc_embed ? 2 : 0), b);
  data.bc_rows.resize(2, b);
  data.target_u.resize(m, b);
  data.target_v.resize(m, b);
  data.target_s.resize(m, b);
  for (Eigen::Index col = 0; col < b; ++col) {
    const auto& rec = dataset.records.at(static_cast<std::size_t>(batch[col]));
    for (int i = 0; i < g.n_across; ++i)
      for (int jj = 0; jj < g.n_along; ++jj) {
        const int row = i * g.n_along + jj;
        data.enc_input(row, col) = norm.s.normalize(rec.bathymetry(i, jj));
        data.target_u(row, col) = norm.u.normalize(rec.u(i, jj));
        data.target_v(row, col) = norm.v.normalize(rec.v(i, jj));
        data.target_s(row, col) = norm.s.normalize(rec.bathymetry(i, jj));
      }
    data.bc_rows(0, col) = norm.discharge.normalize(rec.bc.discharge);
    data.bc_rows(1, col) = norm.stage.normalize(rec.bc.downstream_surface);
    if (bc_embed) data.enc_input.block(m, col, 2, 1) = data.bc_rows.col(col);
  }
  return data;
}

struct LossWork {
  SveLossTerms terms;
  ForwardCache enc_cache, dec_cache;
  Eigen::MatrixXd mu, log_var, z, dec_input;
};

LossWork run_loss_forward(const SveModel& model, const BatchData& data,
                          const Eigen::MatrixXd* xi) {
  const auto b = data.enc_input.cols();
  const int k = model.latent_dim();
  LossWork w;
  w.enc_cache = forward(model.encoder(), data.enc_input);
  w.mu = w.enc_cache.head_out[0];
  w.log_var = w.enc_cache.head_out[1];
  if (xi != nullptr) {
    if (xi->rows() != k || xi->cols() != b)
      throw ValidationError("loss: xi dimensions do not match batch");
    w.z = w.mu.array() + (0.5 * w.log_var.array()).exp() * xi->array();
  } else {
    w.z = w.mu;
  }
  const bool bc_embed = model.architecture().bc_embedding;
  w.dec_input.resize(k + (bc_embed ? 2 : 0), b);
  w.dec_input.topRows(k) = w.z;
  if (bc_embed) w.dec_input.bottomRows(2) = data.bc_rows;
  w.dec_cache = forward(model.decoder(), w.dec_input);

  const double scale = static_cast<double>(data.target_u.size());
  w.terms.u = (w.dec_cache.head_out[0] - data.target_u).squaredNorm() / scale;
  w.terms.v = (w.dec_cache.head_out[1] - data.target_v).squaredNorm() / scale;
  w.terms.s = (w.dec_cache.head_out[2] - data.target_s).squaredNorm() / scale;
  w.terms.kl = 0.5 *
               (w.log_var.array().exp() + w.mu.array().square() - 1.0 - w.log_var.array())
                   .sum() /
               static_cast<double>(b);
  w.terms.total = w.terms.u + w.terms.v + w.terms.s +
                  model.architecture().kl_weight * w.terms.kl;
  return w;
}

}  // namespace

SveLossTerms sve_loss(const SveModel& model, const Dataset& dataset,
                      const std::vector<int>& batch, const Eigen::MatrixXd* xi) {
  const BatchData data = assemble_batch(model, dataset, batch);
  return run_loss_forward(model, data, xi).terms;
}

SveLossTerms sve_loss_and_grads(const SveModel& model, const Dataset& dataset,
                                const std::vector<int>& batch, const Eigen::MatrixXd* xi,
                                FeedForwardGrads& encoder_grads,
                                FeedForwardGrads& decoder_grads) {
  const BatchData data = assemble_batch(model, dataset, batch);
  LossWork w = run_loss_forward(model, data, xi);
  const auto b = static_cast<double>(data.enc_input.cols());
  const double beta = model.architecture().kl_weight;
  const double scale = static_cast<double>(data.target_u.size());
  const int k = model.latent_dim();

  std::vector<Eigen::MatrixXd> dec_head_grads{
      2.0 / scale * (w.dec_cache.head_out[0] - data.target_u),
      2.0 / scale * (w.dec_cache.head_out[1] - data.target_v),
      2.0 / scale * (w.dec_cache.head_out[2] - data.target_s)};
  const Eigen::MatrixXd d_dec_input =
      backward(model.decoder(), w.dec_cache, dec_head_grads, decoder_grads);
  const Eigen::MatrixXd dz = d_dec_input.topRows(k);

  Eigen::MatrixXd dmu = dz;
  Eigen::MatrixXd dlv = Eigen::MatrixXd::Zero(k, static_cast<Eigen::Index>(b));
  if (xi != nullptr)
    dlv = (dz.array() * xi->array() * (0.5 * w.log_var.array()).exp() * 0.5).matrix();
  // KL pressure toward the standard normal.
  dmu.array() += beta * w.mu.array() / b;
  dlv.array() += beta * 0.5 * (w.log_var.array().exp() - 1.0) / b;

  backward(model.encoder(), w.enc_cache, {dmu, dlv}, encoder_grads);
  return w.terms;
}

std::pair<std::vector<int>, std::vector<int>> split_indices(int n_records,
                                                            double val_fraction,
                                                            std::uint64_t seed) {
  std::vector<int> idx(static_cast<std::size_t>(n_records));
  for (int i = 0; i < n_records; ++i) idx[static_cast<std::size_t>(i)] = i;
  Rng rng = Rng(seed).fork(0x5f117);
  for (int i = n_records - 1; i > 0; --i) {
    const auto j = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  int n_val = val_fraction > 0.0
                  ? std::max(1, static_cast<int>(std::lround(val_fraction * n_records)))
                  : 0;
  if (n_val >= n_records) n_val = n_records - 1;
  std::vector<int> train(idx.begin(), idx.end() - n_val);
  std::vector<int> val(idx.end() - n_val, idx.end());
  return {std::move(train), std::move(val)};
}

Normalization fit_normalization(const Dataset& dataset, const std::vector<int>& records) {
  if (records.empty()) throw ValidationError("normalization: no records");
  auto fit_fields = [&](auto&& get_matrix) {
    double sum = 0.0, sumsq = 0.0;
    std::size_t n = 0;
    for (int r : records) {
      const Eigen::MatrixXd& m = get_matrix(dataset.records.at(static_cast<std::size_t>(r)));
      sum += m.sum();
      sumsq += m.array().square().sum();
      n += static_cast<std::size_t>(m.size());
    }
    const double mean = sum / static_cast<double>(n);
    const double var = sumsq / static_cast<double>(n) - mean * mean;
    return FieldNorm{mean, var > 1e-24 ? std::sqrt(var) : 1.0};
  };
  auto fit_scalar = [&](auto&& get_value) {
    double sum = 0.0, sumsq = 0.0;
    for (int r : records) {
      const double x = get_value(dataset.records.at(static_cast<std::size_t>(r)));
      sum += x;
      sumsq += x * x;
    }
    const double n = static_cast<double>(records.size());
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    return FieldNorm{mean, var > 1e-24 ? std::sqrt(var) : 1.0};
  };
  Normalization norm;
  norm.s = fit_fields([](const DatasetRecord& r) -> const Eigen::MatrixXd& { return r.bathymetry; });
  norm.u = fit_fields([](const DatasetRecord& r) -> const Eigen::MatrixXd& { return r.u; });
  norm.v = fit_fields([](const DatasetRecord& r) -> const Eigen::MatrixXd& { return r.v; });
  norm.discharge = fit_scalar([](const DatasetRecord& r) { return r.bc.discharge; });
  norm.stage = fit_scalar([](const DatasetRecord& r) { return r.bc.downstream_surface; });
  return norm;
}

std::uint64_t dataset_fingerprint(const Dataset& dataset) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](std::uint64_t x) {
    h ^= x;
    h *= 0x100000001b3ull;
  };
  mix(static_cast<std::uint64_t>(dataset.geometry.n_across));
  mix(static_cast<std::uint64_t>(dataset.geometry.n_along));
  std::uint64_t bits;
  std::memcpy(&bits, &dataset.geometry.dx, 8);
  mix(bits);
  std::memcpy(&bits, &dataset.geometry.dy, 8);
  mix(bits);
  mix(dataset.records.size());
  for (const auto& [key, value] : dataset.metadata) {
    for (char c : key) mix(static_cast<std::uint64_t>(static_cast<unsigned char>(c)));
    for (char c : value) mix(static_cast<std::uint64_t>(static_cast<unsigned char>(c)));
  }
  return h;
}

SveModel train_sve(const Dataset& dataset, const SveArchitecture& architecture,
                   const TrainHyper& hyper) {
  architecture.validate();
  hyper.validate();
  dataset.validate();
  const int n = static_cast<int>(dataset.records.size());
  if (n < 2 * hyper.batch_size)
    throw ValidationError("training: dataset must hold at least 2 x batch_size records");

  auto [train_idx, val_idx] = split_indices(n, hyper.val_fraction, hyper.seed);
  const Normalization norm = fit_normalization(dataset, train_idx);
  SveModel model = SveModel::initialize(dataset.geometry, architecture, norm, hyper.seed);

  TrainingRecord record;
  record.seed = hyper.seed;
  record.dataset_fingerprint = dataset_fingerprint(dataset);
  record.n_train = static_cast<int>(train_idx.size());
  record.n_val = static_cast<int>(val_idx.size());

  Adam enc_opt(model.encoder_, hyper.step_size);
  Adam dec_opt(model.decoder_, hyper.step_size);
  Rng shuffle_rng = Rng(hyper.seed).fork(0xba7c4);
  Rng noise_rng = Rng(hyper.seed).fork(0x201e);

  FeedForward best_encoder = model.encoder_;
  FeedForward best_decoder = model.decoder_;
  double best_val = std::numeric_limits<double>::infinity();
  const int k = architecture.latent_dim;

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    enc_opt.set_step_size(hyper.step_at(epoch));
    dec_opt.set_step_size(hyper.step_at(epoch));
    std::vector<int> order = train_idx;
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i) {
      const auto j =
          static_cast<int>(shuffle_rng.next_u64() % static_cast<std::uint64_t>(i + 1));
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
      const std::size_t stop = std::min(order.size(), start + hyper.batch_size);
      const std::vector<int> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                   order.begin() + static_cast<std::ptrdiff_t>(stop));
      Eigen::MatrixXd xi(k, static_cast<Eigen::Index>(batch.size()));
      for (Eigen::Index c = 0; c < xi.cols(); ++c)
        for (int r = 0; r < k; ++r) xi(r, c) = noise_rng.normal();
      FeedForwardGrads enc_grads = FeedForwardGrads::zeros_like(model.encoder_);
      FeedForwardGrads dec_grads = FeedForwardGrads::zeros_like(model.decoder_);
      const SveLossTerms terms =
          sve_loss_and_grads(model, dataset, batch, &xi, enc_grads, dec_grads);
      if (!std::isfinite(terms.total))
        throw NumericsError("training diverged at epoch " + std::to_string(epoch));
      enc_opt.step(model.encoder_, enc_grads);
      dec_opt.step(model.decoder_, dec_grads);
      epoch_loss += terms.total * static_cast<double>(batch.size());
      seen += batch.size();
    }
    record.train_loss.push_back(epoch_loss / static_cast<double>(seen));

    if (!val_idx.empty()) {
      const SveLossTerms val = sve_loss(model, dataset, val_idx, nullptr);
      record.val_loss.push_back(val.total);
      if (val.total < best_val) {
        best_val = val.total;
        best_encoder = model.encoder_;
        best_decoder = model.decoder_;
        record.best_epoch = epoch;
        record.final_val = val;
      }
    } else {
      record.val_loss.push_back(record.train_loss.back());
      best_encoder = model.encoder_;
      best_decoder = model.decoder_;
      record.best_epoch = epoch;
    }
  }

  model.encoder_ = std::move(best_encoder);
  model.decoder_ = std::move(best_decoder);
  if (hyper.epochs > 0 && !val_idx.empty() && record.best_epoch < 0)
    throw NumericsError("training: validation loss never became finite");
  if (hyper.epochs == 0 && !val_idx.empty())
    record.final_val = sve_loss(model, dataset, val_idx, nullptr);
  if (!val_idx.empty()) {
    double sum_u = 0.0, sum_v = 0.0;
    for (int r : val_idx) {
      const auto& rec = dataset.records[static_cast<std::size_t>(r)];
      const LatentGaussian g =
          model.encode(BathymetryField{dataset.geometry, rec.bathymetry}, rec.bc);
      const Rom::Decoded d = model.decode(g.mu, rec.bc);
      sum_u += grid_rmse(d.u, rec.u);
      sum_v += grid_rmse(d.v, rec.v);
    }
    record.val_recon_u = sum_u / static_cast<double>(val_idx.size());
    record.val_recon_v = sum_v / static_cast<double>(val_idx.size());
  }
  model.set_training_record(std::move(record));
  return model;
}

}  // namespace bathyrom
