#include "bathyrom/model_io.hpp"

#include "bathyrom/container.hpp"
#include "bathyrom/errors.hpp"

namespace bathyrom {
namespace {

void put_u64(Container& c, const std::string& name, std::uint64_t value) {
  c.put_u32(name, {2},
            {static_cast<std::uint32_t>(value & 0xffffffffull),
             static_cast<std::uint32_t>(value >> 32)});
}

std::uint64_t get_u64(const Container& c, const std::string& name) {
  const auto parts = c.get_u32(name);
  if (parts.size() != 2) throw FormatError("model: malformed u64 array '" + name + "'");
  return static_cast<std::uint64_t>(parts[0]) | (static_cast<std::uint64_t>(parts[1]) << 32);
}

void put_widths(Container& c, const std::string& name, const std::vector<int>& widths) {
  std::vector<std::uint32_t> w(widths.begin(), widths.end());
  c.put_u32(name, {w.size()}, w);
}

std::vector<int> get_widths(const Container& c, const std::string& name) {
  const auto w = c.get_u32(name);
  return {w.begin(), w.end()};
}

void put_net(Container& c, const std::string& prefix, const FeedForward& net) {
  c.put_scalar_u32(prefix + "/n_trunk", static_cast<std::uint32_t>(net.trunk.size()));
  c.put_scalar_u32(prefix + "/n_heads", static_cast<std::uint32_t>(net.heads.size()));
  for (std::size_t i = 0; i < net.trunk.size(); ++i) {
    c.put_matrix_f64(prefix + "/trunk" + std::to_string(i) + "/w", net.trunk[i].w);
    c.put_vector_f64(prefix + "/trunk" + std::to_string(i) + "/b", net.trunk[i].b);
  }
  for (std::size_t i = 0; i < net.heads.size(); ++i) {
    c.put_matrix_f64(prefix + "/head" + std::to_string(i) + "/w", net.heads[i].w);
    c.put_vector_f64(prefix + "/head" + std::to_string(i) + "/b", net.heads[i].b);
  }
}

FeedForward get_net(const Container& c, const std::string& prefix) {
  FeedForward net;
  const auto n_trunk = c.get_scalar_u32(prefix + "/n_trunk");
  const auto n_heads = c.get_scalar_u32(prefix + "/n_heads");
  for (std::uint32_t i = 0; i < n_trunk; ++i)
    net.trunk.push_back({c.get_matrix(prefix + "/trunk" + std::to_string(i) + "/w"),
                         c.get_vector(prefix + "/trunk" + std::to_string(i) + "/b")});
  for (std::uint32_t i = 0; i < n_heads; ++i)
    net.heads.push_back({c.get_matrix(prefix + "/head" + std::to_string(i) + "/w"),
                         c.get_vector(prefix + "/head" + std::to_string(i) + "/b")});
  return net;
}

void put_norm(Container& c, const Normalization& norm) {
  c.put_f64("norm/stats", {10},
            {norm.s.mean, norm.s.std, norm.u.mean, norm.u.std, norm.v.mean, norm.v.std,
             norm.discharge.mean, norm.discharge.std, norm.stage.mean, norm.stage.std});
}

Normalization get_norm(const Container& c) {
  const auto s = c.get_f64("norm/stats");
  if (s.size() != 10) throw FormatError("model: malformed normalization array");
  Normalization norm;
  norm.s = {s[0], s[1]};
  norm.u = {s[2], s[3]};
  norm.v = {s[4], s[5]};
  norm.discharge = {s[6], s[7]};
  norm.stage = {s[8], s[9]};
  return norm;
}

void put_geometry(Container& c, const ChannelGeometry& g) {
  c.put_u32("geometry/dims", {2},
            {static_cast<std::uint32_t>(g.n_across), static_cast<std::uint32_t>(g.n_along)});
  c.put_f64("geometry/spacing", {2}, {g.dx, g.dy});
}

ChannelGeometry get_geometry(const Container& c) {
  const auto dims = c.get_u32("geometry/dims");
  const auto spacing = c.get_f64("geometry/spacing");
  if (dims.size() != 2 || spacing.size() != 2)
    throw FormatError("model: malformed geometry arrays");
  return {static_cast<int>(dims[0]), static_cast<int>(dims[1]), spacing[0], spacing[1]};
}

void put_training(Container& c, const TrainingRecord& t) {
  put_u64(c, "train/seed", t.seed);
  put_u64(c, "train/fingerprint", t.dataset_fingerprint);
  c.put_scalar_u32("train/n_train", static_cast<std::uint32_t>(t.n_train));
  c.put_scalar_u32("train/n_val", static_cast<std::uint32_t>(t.n_val));
  c.put_scalar_u32("train/best_epoch", static_cast<std::uint32_t>(t.best_epoch + 1));
  c.put_f64("train/train_loss", {t.train_loss.size()}, t.train_loss);
  c.put_f64("train/val_loss", {t.val_loss.size()}, t.val_loss);
  c.put_f64("train/final_val", {5},
            {t.final_val.total, t.final_val.u, t.final_val.v, t.final_val.s, t.final_val.kl});
  c.put_f64("train/val_recon", {2}, {t.val_recon_u, t.val_recon_v});
}

TrainingRecord get_training(const Container& c) {
  TrainingRecord t;
  t.seed = get_u64(c, "train/seed");
  t.dataset_fingerprint = get_u64(c, "train/fingerprint");
  t.n_train = static_cast<int>(c.get_scalar_u32("train/n_train"));
  t.n_val = static_cast<int>(c.get_scalar_u32("train/n_val"));
  t.best_epoch = static_cast<int>(c.get_scalar_u32("train/best_epoch")) - 1;
  t.train_loss = c.get_f64("train/train_loss");
  t.val_loss = c.get_f64("train/val_loss");
  const auto f = c.get_f64("train/final_val");
  if (f.size() != 5) throw FormatError("model: malformed final loss array");
  t.final_val = {f[0], f[1], f[2], f[3], f[4]};
  const auto recon = c.get_f64("train/val_recon");
  if (recon.size() != 2) throw FormatError("model: malformed validation recon array");
  t.val_recon_u = recon[0];
  t.val_recon_v = recon[1];
  return t;
}

void put_basis(Container& c, const std::string& prefix, const PcaBasis& basis) {
  c.put_vector_f64(prefix + "/mean", basis.mean);
  c.put_matrix_f64(prefix + "/components", basis.components);
  c.put_vector_f64(prefix + "/variance", basis.explained_variance);
}

PcaBasis get_basis(const Container& c, const std::string& prefix) {
  return {c.get_vector(prefix + "/mean"), c.get_matrix(prefix + "/components"),
          c.get_vector(prefix + "/variance")};
}

}  // namespace

void save_model(const SveModel& model, const std::filesystem::path& path) {
  Container c;
  c.put_string("meta/kind", "sve");
  put_geometry(c, model.geometry());
  const auto& arch = model.architecture();
  c.put_scalar_u32("arch/latent_dim", static_cast<std::uint32_t>(arch.latent_dim));
  put_widths(c, "arch/encoder_widths", arch.encoder_widths);
  put_widths(c, "arch/decoder_widths", arch.decoder_widths);
  c.put_scalar_f64("arch/kl_weight", arch.kl_weight);
  c.put_scalar_u32("arch/bc_embedding", arch.bc_embedding ? 1 : 0);
  put_norm(c, model.normalization());
  put_net(c, "encoder", model.encoder());
  put_net(c, "decoder", model.decoder());
  put_training(c, model.training());
  c.save(path);
}

SveModel load_sve_model(const std::filesystem::path& path) {
  const Container c = Container::load(path);
  if (c.get_string("meta/kind") != "sve")
    throw FormatError("model: '" + path.string() + "' does not hold an encoder model");
  SveArchitecture arch;
  arch.latent_dim = static_cast<int>(c.get_scalar_u32("arch/latent_dim"));
  arch.encoder_widths = get_widths(c, "arch/encoder_widths");
  arch.decoder_widths = get_widths(c, "arch/decoder_widths");
  arch.kl_weight = c.get_scalar_f64("arch/kl_weight");
  arch.bc_embedding = c.get_scalar_u32("arch/bc_embedding") != 0;
  SveModel model(get_geometry(c), arch, get_norm(c), get_net(c, "encoder"),
                 get_net(c, "decoder"));
  model.set_training_record(get_training(c));
  return model;
}

void save_model(const PcaRomModel& model, const std::filesystem::path& path) {
  Container c;
  c.put_string("meta/kind", "pca");
  put_geometry(c, model.geometry());
  c.put_scalar_u32("arch/latent_dim", static_cast<std::uint32_t>(model.latent_dim()));
  put_norm(c, model.normalization());
  put_basis(c, "pca/input", model.input_basis());
  put_basis(c, "pca/u", model.output_basis_u());
  put_basis(c, "pca/v", model.output_basis_v());
  put_basis(c, "pca/s", model.output_basis_s());
  put_net(c, "regressor", model.regressor().net);
  c.put_matrix_f64("regressor/skip_u", model.regressor().skip_u);
  c.put_matrix_f64("regressor/skip_v", model.regressor().skip_v);
  c.put_matrix_f64("regressor/skip_s", model.regressor().skip_s);
  put_training(c, model.training());
  c.save(path);
}

PcaRomModel load_pca_model(const std::filesystem::path& path) {
  const Container c = Container::load(path);
  if (c.get_string("meta/kind") != "pca")
    throw FormatError("model: '" + path.string() + "' does not hold a PCA model");
  PcaRegressor reg;
  reg.net = get_net(c, "regressor");
  reg.skip_u = c.get_matrix("regressor/skip_u");
  reg.skip_v = c.get_matrix("regressor/skip_v");
  reg.skip_s = c.get_matrix("regressor/skip_s");
  PcaRomModel model(get_geometry(c), get_basis(c, "pca/input"), get_basis(c, "pca/u"),
                    get_basis(c, "pca/v"), get_basis(c, "pca/s"), std::move(reg),
                    get_norm(c));
  model.set_training_record(get_training(c));
  return model;
}

std::string model_kind(const std::filesystem::path& path) {
  return Container::load(path).get_string("meta/kind");
}

std::unique_ptr<Rom> load_model(const std::filesystem::path& path) {
  const std::string kind = model_kind(path);
  if (kind == "sve") return std::make_unique<SveModel>(load_sve_model(path));
  if (kind == "pca") return std::make_unique<PcaRomModel>(load_pca_model(path));
  throw FormatError("model: unknown kind '" + kind + "'");
}

}  // namespace bathyrom
