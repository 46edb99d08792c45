#include "bathyrom/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "bathyrom/errors.hpp"

namespace bathyrom {
namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  const auto end = s.find_last_not_of(" \t\r");
  return begin == std::string::npos ? "" : s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double x = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return x;
  } catch (const std::exception&) {
    throw ValidationError("config: key '" + key + "' expects a number, got '" + value + "'");
  }
}

int parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const int x = std::stoi(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return x;
  } catch (const std::exception&) {
    throw ValidationError("config: key '" + key + "' expects an integer, got '" + value +
                          "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const std::uint64_t x = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return x;
  } catch (const std::exception&) {
    throw ValidationError("config: key '" + key + "' expects an unsigned integer, got '" +
                          value + "'");
  }
}

std::vector<int> parse_widths(const std::string& key, const std::string& value) {
  std::vector<int> widths;
  if (trim(value).empty()) return widths;
  std::stringstream stream(value);
  std::string part;
  while (std::getline(stream, part, ','))
    widths.push_back(parse_int(key, trim(part)));
  return widths;
}

}  // namespace

void RunConfig::validate() const {
  geometry.validate();
  prior.kernel.validate();
  prior.parabolic.validate();
  prior.trapezoid.validate();
  if (prior.n_modes < 1 || prior.n_modes > geometry.node_count())
    throw ValidationError("config: prior.n_modes out of range for the geometry");
  forward.validate();
  bc.validate();
  if (rom_kind != "sve" && rom_kind != "pca")
    throw ValidationError("config: rom.kind must be 'sve' or 'pca'");
  architecture.validate();
  training.validate();
  inversion.validate();
  if (!(observation_noise_std > 0.0))
    throw ValidationError("config: observation.noise_std must be positive");
  if (observation_mask_points < 0 || observation_mask_points > geometry.node_count())
    throw ValidationError("config: observation.mask_points out of range");
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> keys = {
      {"geometry.n_across", [&](auto& k, auto& v) { cfg.geometry.n_across = parse_int(k, v); }},
      {"geometry.n_along", [&](auto& k, auto& v) { cfg.geometry.n_along = parse_int(k, v); }},
      {"geometry.dx", [&](auto& k, auto& v) { cfg.geometry.dx = parse_double(k, v); }},
      {"geometry.dy", [&](auto& k, auto& v) { cfg.geometry.dy = parse_double(k, v); }},
      {"prior.family",
       [&](auto& k, auto& v) {
         if (v == "parabolic") cfg.prior.family = MeanFamily::kParabolic;
         else if (v == "trapezoid") cfg.prior.family = MeanFamily::kTrapezoid;
         else throw ValidationError("config: key '" + k + "' expects parabolic|trapezoid");
       }},
      {"prior.sigma", [&](auto& k, auto& v) { cfg.prior.kernel.sigma = parse_double(k, v); }},
      {"prior.len_along",
       [&](auto& k, auto& v) { cfg.prior.kernel.len_along = parse_double(k, v); }},
      {"prior.len_across",
       [&](auto& k, auto& v) { cfg.prior.kernel.len_across = parse_double(k, v); }},
      {"prior.nugget", [&](auto& k, auto& v) { cfg.prior.kernel.nugget = parse_double(k, v); }},
      {"prior.n_modes", [&](auto& k, auto& v) { cfg.prior.n_modes = parse_int(k, v); }},
      {"prior.thalweg_elevation",
       [&](auto& k, auto& v) {
         cfg.prior.parabolic.thalweg_elevation = parse_double(k, v);
         cfg.prior.trapezoid.thalweg_elevation = cfg.prior.parabolic.thalweg_elevation;
       }},
      {"prior.bank_rise",
       [&](auto& k, auto& v) {
         cfg.prior.parabolic.bank_rise = parse_double(k, v);
         cfg.prior.trapezoid.bank_rise = cfg.prior.parabolic.bank_rise;
       }},
      {"prior.along_trend",
       [&](auto& k, auto& v) {
         cfg.prior.parabolic.along_trend = parse_double(k, v);
         cfg.prior.trapezoid.along_trend = cfg.prior.parabolic.along_trend;
       }},
      {"prior.flat_fraction",
       [&](auto& k, auto& v) { cfg.prior.trapezoid.flat_fraction = parse_double(k, v); }},
      {"forward.manning_n",
       [&](auto& k, auto& v) { cfg.forward.manning_n = parse_double(k, v); }},
      {"forward.min_depth",
       [&](auto& k, auto& v) { cfg.forward.min_depth = parse_double(k, v); }},
      {"forward.max_slope",
       [&](auto& k, auto& v) { cfg.forward.max_backwater_slope = parse_double(k, v); }},
      {"bc.discharge_min",
       [&](auto& k, auto& v) { cfg.bc.discharge_min = parse_double(k, v); }},
      {"bc.discharge_max",
       [&](auto& k, auto& v) { cfg.bc.discharge_max = parse_double(k, v); }},
      {"bc.surface_min", [&](auto& k, auto& v) { cfg.bc.surface_min = parse_double(k, v); }},
      {"bc.surface_max", [&](auto& k, auto& v) { cfg.bc.surface_max = parse_double(k, v); }},
      {"rom.kind", [&](auto&, auto& v) { cfg.rom_kind = v; }},
      {"rom.latent_dim",
       [&](auto& k, auto& v) { cfg.architecture.latent_dim = parse_int(k, v); }},
      {"rom.encoder_widths",
       [&](auto& k, auto& v) { cfg.architecture.encoder_widths = parse_widths(k, v); }},
      {"rom.decoder_widths",
       [&](auto& k, auto& v) { cfg.architecture.decoder_widths = parse_widths(k, v); }},
      {"rom.regressor_widths",
       [&](auto& k, auto& v) { cfg.regressor_widths = parse_widths(k, v); }},
      {"rom.kl_weight",
       [&](auto& k, auto& v) { cfg.architecture.kl_weight = parse_double(k, v); }},
      {"rom.bc_embedding",
       [&](auto& k, auto& v) { cfg.architecture.bc_embedding = parse_int(k, v) != 0; }},
      {"rom.epochs", [&](auto& k, auto& v) { cfg.training.epochs = parse_int(k, v); }},
      {"rom.batch_size", [&](auto& k, auto& v) { cfg.training.batch_size = parse_int(k, v); }},
      {"rom.step_size", [&](auto& k, auto& v) { cfg.training.step_size = parse_double(k, v); }},
      {"rom.seed", [&](auto& k, auto& v) { cfg.training.seed = parse_u64(k, v); }},
      {"rom.val_fraction",
       [&](auto& k, auto& v) { cfg.training.val_fraction = parse_double(k, v); }},
      {"inversion.max_iterations",
       [&](auto& k, auto& v) { cfg.inversion.max_iterations = parse_int(k, v); }},
      {"inversion.grad_tol",
       [&](auto& k, auto& v) { cfg.inversion.grad_tol_rel = parse_double(k, v); }},
      {"inversion.alpha_init",
       [&](auto& k, auto& v) { cfg.inversion.alpha_init = parse_double(k, v); }},
      {"inversion.shrink",
       [&](auto& k, auto& v) { cfg.inversion.line_search.shrink = parse_double(k, v); }},
      {"inversion.max_backtracks",
       [&](auto& k, auto& v) { cfg.inversion.line_search.max_backtracks = parse_int(k, v); }},
      {"inversion.sufficient_decrease",
       [&](auto& k, auto& v) {
         cfg.inversion.line_search.sufficient_decrease = parse_double(k, v);
       }},
      {"inversion.jacobian_mode",
       [&](auto& k, auto& v) {
         if (v == "analytic") cfg.inversion.jacobian_mode = JacobianMode::kAnalytic;
         else if (v == "fd") cfg.inversion.jacobian_mode = JacobianMode::kFiniteDifference;
         else throw ValidationError("config: key '" + k + "' expects analytic|fd");
       }},
      {"inversion.fd_delta",
       [&](auto& k, auto& v) { cfg.inversion.fd_delta = parse_double(k, v); }},
      {"inversion.step_form",
       [&](auto& k, auto& v) {
         if (v == "auto") cfg.inversion.step_form = StepForm::kAuto;
         else if (v == "data") cfg.inversion.step_form = StepForm::kDataSpace;
         else if (v == "information") cfg.inversion.step_form = StepForm::kInformation;
         else throw ValidationError("config: key '" + k + "' expects auto|data|information");
       }},
      {"inversion.uq_samples",
       [&](auto& k, auto& v) { cfg.inversion.uq_samples = parse_int(k, v); }},
      {"inversion.uq_seed",
       [&](auto& k, auto& v) { cfg.inversion.uq_seed = parse_u64(k, v); }},
      {"observation.noise_std",
       [&](auto& k, auto& v) { cfg.observation_noise_std = parse_double(k, v); }},
      {"observation.mask_points",
       [&](auto& k, auto& v) { cfg.observation_mask_points = parse_int(k, v); }},
  };

  std::istringstream stream(text);
  std::string line;
  int line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config: line " + std::to_string(line_no) +
                            " is not of the form key = value");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    const auto it = keys.find(key);
    if (it == keys.end())
      throw ValidationError("config: unknown key '" + key + "' on line " +
                            std::to_string(line_no));
    it->second(key, value);
  }
  cfg.validate();
  return cfg;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config: cannot open '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

}  // namespace bathyrom
