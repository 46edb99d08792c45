#include "bathyrom/commands.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "bathyrom/config.hpp"
#include "bathyrom/diagnostics.hpp"
#include "bathyrom/metrics.hpp"
#include "bathyrom/model_io.hpp"
#include "bathyrom/pgm.hpp"
#include "bathyrom/pipeline.hpp"

namespace bathyrom {
namespace {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  [[nodiscard]] double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

template <typename Fn>
int run_command(std::ostream& log, Fn&& fn) {
  try {
    fn();
    return kExitOk;
  } catch (const ValidationError& e) {
    log << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

RunConfig config_or_default(const std::filesystem::path& path) {
  return path.empty() ? RunConfig{} : parse_config(path);
}

void require_file(const std::filesystem::path& path, const char* what) {
  if (path.empty() || !std::filesystem::exists(path))
    throw ValidationError(std::string(what) + " file '" + path.string() + "' not found");
}

ObservationMask mask_for(const ChannelGeometry& geometry, int mask_points) {
  return mask_points <= 0 ? full_mask(geometry) : equispaced_mask(geometry, mask_points);
}

std::vector<int> capped_range(int n, int cap) {
  std::vector<int> out;
  const int stop = cap > 0 ? std::min(n, cap) : n;
  for (int i = 0; i < stop; ++i) out.push_back(i);
  return out;
}

/// Per-head reconstruction RMSE of a model on listed records (encoder
/// mean for the SVE, input projection for the PCA baseline).
ForwardRmse model_forward_rmse(const Rom& model, const Dataset& dataset,
                               const std::vector<int>& records) {
  if (const auto* sve = dynamic_cast<const SveModel*>(&model))
    return forward_rmse(*sve, dataset, records);
  const auto* pca = dynamic_cast<const PcaRomModel*>(&model);
  if (pca == nullptr) throw ValidationError("evaluate: unknown model type");
  double su = 0.0, sv = 0.0, ss = 0.0;
  for (int r : records) {
    const auto& rec = dataset.records.at(static_cast<std::size_t>(r));
    const Eigen::VectorXd z =
        pca->project(BathymetryField{dataset.geometry, rec.bathymetry});
    const Rom::Decoded d = pca->decode(z, rec.bc);
    su += grid_rmse(d.u, rec.u);
    sv += grid_rmse(d.v, rec.v);
    ss += grid_rmse(d.s, rec.bathymetry);
  }
  const double n = static_cast<double>(records.size());
  return ForwardRmse{su / n, sv / n, ss / n};
}

}  // namespace

int cmd_generate(const std::filesystem::path& config_path, int n, std::uint64_t seed,
                 const std::filesystem::path& out, const GlobalOptions& global,
                 std::ostream& log) {
  return run_command(log, [&] {
    require_file(config_path, "config");
    const RunConfig cfg = parse_config(config_path);
    if (n < 1) throw ValidationError("generate: --n must be >= 1");
    if (out.empty()) throw ValidationError("generate: --out is required");
    Stopwatch timer;
    GenerationResult result = generate_dataset(cfg.geometry, cfg.prior, cfg.bc, cfg.forward,
                                               n, seed, global.threads);
    save_dataset(result.dataset, out);
    log << "generated " << n << " records (" << result.rejections
        << " wet-channel rejections) in " << std::fixed << std::setprecision(2)
        << timer.seconds() << " s -> " << out.string() << "\n";
  });
}

int cmd_train(const std::filesystem::path& dataset_path, const std::string& rom_kind,
              int latent_dim, const std::filesystem::path& out,
              const std::filesystem::path& config_path, const GlobalOptions&,
              std::ostream& log) {
  return run_command(log, [&] {
    require_file(dataset_path, "dataset");
    RunConfig cfg = config_or_default(config_path);
    if (!rom_kind.empty()) cfg.rom_kind = rom_kind;
    if (latent_dim > 0) cfg.architecture.latent_dim = latent_dim;
    cfg.validate();
    if (out.empty()) throw ValidationError("train: --out is required");
    const Dataset dataset = load_dataset(dataset_path);

    Stopwatch timer;
    const auto [train_idx, val_idx] =
        split_indices(static_cast<int>(dataset.records.size()), cfg.training.val_fraction,
                      cfg.training.seed);
    if (cfg.rom_kind == "sve") {
      const SveModel model = train_sve(dataset, cfg.architecture, cfg.training);
      save_model(model, out);
      const auto& rec = model.training();
      log << "trained sve (k=" << cfg.architecture.latent_dim << ") in " << std::fixed
          << std::setprecision(1) << timer.seconds() << " s; best epoch " << rec.best_epoch
          << "; val loss " << std::setprecision(5) << rec.final_val.total << " (u "
          << rec.final_val.u << ", v " << rec.final_val.v << ", s " << rec.final_val.s
          << ", kl " << rec.final_val.kl << ")\n";
      const ForwardRmse v = forward_rmse(model, dataset, val_idx);
      log << "validation reconstruction rmse: u " << std::setprecision(4) << v.u
          << " m/s, v " << v.v << " m/s, bathymetry " << v.s << " m\n";
    } else {
      const PcaRomModel model = train_pca_rom(dataset, cfg.architecture.latent_dim,
                                              cfg.pca_hyper());
      save_model(model, out);
      log << "trained pca (k=" << cfg.architecture.latent_dim << ") in " << std::fixed
          << std::setprecision(1) << timer.seconds() << " s; best epoch "
          << model.training().best_epoch << "; val loss " << std::setprecision(5)
          << model.training().final_val.total << "\n";
      const ForwardRmse v = model_forward_rmse(model, dataset, val_idx);
      log << "validation reconstruction rmse: u " << std::setprecision(4) << v.u
          << " m/s, v " << v.v << " m/s, bathymetry " << v.s << " m\n";
    }
    log << "model -> " << out.string() << "\n";
  });
}

int cmd_invert(const InvertArgs& args, const GlobalOptions&, std::ostream& log) {
  return run_command(log, [&] {
    require_file(args.model, "model");
    if (args.out.empty()) throw ValidationError("invert: --out is required");
    const RunConfig cfg = config_or_default(args.config);
    const std::unique_ptr<Rom> model = load_model(args.model);

    ObservationSet obs;
    const DatasetRecord* truth = nullptr;
    Dataset dataset;
    if (!args.observations.empty()) {
      require_file(args.observations, "observations");
      auto [loaded, geometry] = load_observations(args.observations);
      if (geometry != model->geometry())
        throw ValidationError("invert: observation geometry does not match the model");
      obs = std::move(loaded);
    } else {
      require_file(args.dataset, "dataset");
      dataset = load_dataset(args.dataset);
      if (dataset.geometry != model->geometry())
        throw ValidationError("invert: dataset geometry does not match the model");
      const ObservationMask mask = mask_for(dataset.geometry, args.mask_points);
      obs = synthesize_observations(dataset, args.record, mask, cfg.observation_noise_std,
                                    args.noise_seed, model->velocity_model_error());
      truth = &dataset.records.at(static_cast<std::size_t>(args.record));
    }

    Stopwatch timer;
    const PosteriorEstimate est = invert(obs, *model, cfg.inversion);
    save_posterior(est, model->kind(), args.out);
    log << "inverted in " << std::fixed << std::setprecision(2) << timer.seconds()
        << " s; iterations " << est.iterations_used << "; |z_map| " << std::setprecision(4)
        << est.z_map.norm() << "; final objective " << est.objective_trace.back()
        << (est.converged ? " (gradient converged)" : "") << "\n";
    if (truth != nullptr)
      log << "bathymetry rmse vs truth: "
          << grid_rmse(est.bathymetry_map.bed_elevation, truth->bathymetry) << " m\n";
    log << "result -> " << args.out.string() << "\n";
  });
}

int cmd_evaluate(const EvaluateArgs& args, const GlobalOptions& global, std::ostream& log) {
  return run_command(log, [&] {
    require_file(args.model, "model");
    require_file(args.dataset, "dataset");
    const RunConfig cfg = config_or_default(args.config);
    const std::unique_ptr<Rom> model = load_model(args.model);
    const Dataset dataset = load_dataset(args.dataset);
    if (dataset.geometry != model->geometry())
      throw ValidationError("evaluate: dataset geometry does not match the model");
    const ObservationMask mask = mask_for(dataset.geometry, args.mask_points);

    // Columns: train/val when this is the training dataset, test from the
    // extra dataset (or from this one when it is not the training set).
    const TrainingRecord& trained = model->kind() == "sve"
                                        ? dynamic_cast<const SveModel&>(*model).training()
                                        : dynamic_cast<const PcaRomModel&>(*model).training();
    const bool is_training_set = dataset_fingerprint(dataset) == trained.dataset_fingerprint;

    double train_rmse = std::nan(""), val_rmse = std::nan(""), test_rmse = std::nan("");
    if (is_training_set) {
      const int n = static_cast<int>(dataset.records.size());
      const double val_fraction =
          trained.n_val > 0 ? static_cast<double>(trained.n_val) / n : 0.0;
      auto [train_idx, val_idx] = split_indices(n, val_fraction, trained.seed);
      if (args.max_records > 0 && static_cast<int>(train_idx.size()) > args.max_records)
        train_idx.resize(static_cast<std::size_t>(args.max_records));
      if (args.max_records > 0 && static_cast<int>(val_idx.size()) > args.max_records)
        val_idx.resize(static_cast<std::size_t>(args.max_records));
      train_rmse = mean_of(inversion_rmse(*model, dataset, train_idx, mask,
                                          cfg.observation_noise_std, args.noise_seed,
                                          cfg.inversion, global.threads));
      val_rmse = mean_of(inversion_rmse(*model, dataset, val_idx, mask,
                                        cfg.observation_noise_std, args.noise_seed,
                                        cfg.inversion, global.threads));
    } else {
      const auto records = capped_range(static_cast<int>(dataset.records.size()),
                                        args.max_records);
      test_rmse = mean_of(inversion_rmse(*model, dataset, records, mask,
                                         cfg.observation_noise_std, args.noise_seed,
                                         cfg.inversion, global.threads));
    }
    if (!args.test_dataset.empty()) {
      require_file(args.test_dataset, "test dataset");
      const Dataset test = load_dataset(args.test_dataset);
      if (test.geometry != model->geometry())
        throw ValidationError("evaluate: test dataset geometry does not match the model");
      if (test.records.empty()) throw ValidationError("evaluate: test split is empty");
      const auto records = capped_range(static_cast<int>(test.records.size()),
                                        args.max_records);
      test_rmse = mean_of(inversion_rmse(*model, test, records, mask,
                                         cfg.observation_noise_std, args.noise_seed,
                                         cfg.inversion, global.threads));
    }
    if (std::isnan(train_rmse) && std::isnan(val_rmse) && std::isnan(test_rmse))
      throw ValidationError("evaluate: nothing to evaluate (empty splits)");

    auto cell = [](double x) {
      if (std::isnan(x)) return std::string("-");
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.4f", x);
      return std::string(buf);
    };
    log << "inversion rmse [m] (" << model->kind() << ", k=" << model->latent_dim()
        << ", mask=" << mask.point_count() << " points)\n";
    log << "  training set    validation set    test set\n";
    log << "  " << std::setw(14) << std::left << cell(train_rmse) << "  " << std::setw(16)
        << cell(val_rmse) << "  " << cell(test_rmse) << "\n";
  });
}

int cmd_diagnose(const DiagnoseArgs& args, const GlobalOptions& global, std::ostream& log) {
  return run_command(log, [&] {
    const RunConfig cfg = config_or_default(args.config);
    const auto prefix = args.out_prefix;

    auto write_report = [&](const std::string& csv, const std::string& summary) {
      std::ofstream csv_out(prefix.string() + ".csv", std::ios::trunc);
      csv_out << csv;
      std::ofstream txt_out(prefix.string() + ".txt", std::ios::trunc);
      txt_out << summary;
      log << summary;
      log << "report -> " << prefix.string() << ".csv, " << prefix.string() << ".txt\n";
    };

    auto write_heatmaps = [&](const Rom& model, const Dataset& dataset) {
      if (dataset.records.empty()) return;
      const ObservationMask mask = mask_for(dataset.geometry, 0);
      const ObservationSet obs =
          synthesize_observations(dataset, 0, mask, cfg.observation_noise_std,
                                  args.noise_seed, model.velocity_model_error());
      InversionOptions opts = cfg.inversion;
      opts.uq_samples = std::max(opts.uq_samples, 200);
      const PosteriorEstimate est = invert(obs, model, opts);
      const Eigen::MatrixXd& truth = dataset.records.front().bathymetry;
      const Eigen::MatrixXd error = est.bathymetry_map.bed_elevation - truth;
      for (const auto& [tag, grid] :
           std::vector<std::pair<std::string, const Eigen::MatrixXd*>>{
               {"truth", &truth},
               {"estimate", &est.bathymetry_map.bed_elevation},
               {"error", &error},
               {"std", &est.bathymetry_std}}) {
        write_pgm(*grid, prefix.string() + "_" + tag + ".pgm");
        write_grid_csv(*grid, prefix.string() + "_" + tag + ".csv");
      }
      log << "heatmaps -> " << prefix.string() << "_{truth,estimate,error,std}.pgm\n";
    };

    if (args.kind == "hessian") {
      require_file(args.model, "model");
      const std::unique_ptr<Rom> model = load_model(args.model);
      const Eigen::VectorXd z = Eigen::VectorXd::Zero(model->latent_dim());
      const BoundaryConditions bc{0.5 * (cfg.bc.discharge_min + cfg.bc.discharge_max),
                                  0.5 * (cfg.bc.surface_min + cfg.bc.surface_max)};
      std::ostringstream csv, txt;
      csv << "term,index,singular_value\n";
      txt << "hessian spectra (h = " << args.fd_step << ")\n";
      for (const auto& [name, term] : std::vector<std::pair<std::string, LossTerm>>{
               {"u", LossTerm::kU}, {"v", LossTerm::kV}, {"s", LossTerm::kS}}) {
        const Eigen::VectorXd spectrum =
            model_hessian_spectrum(*model, term, z, bc, args.fd_step);
        for (Eigen::Index i = 0; i < spectrum.size(); ++i)
          csv << name << "," << i << "," << spectrum[i] << "\n";
        txt << "  " << name << ": max " << spectrum.maxCoeff() << ", min "
            << spectrum.minCoeff() << "\n";
      }
      write_report(csv.str(), txt.str());
      return;
    }

    if (args.kind == "sparsity") {
      require_file(args.model, "model");
      require_file(args.dataset, "dataset");
      const std::unique_ptr<Rom> model = load_model(args.model);
      const Dataset dataset = load_dataset(args.dataset);
      std::vector<int> counts = args.counts;
      if (counts.empty())
        counts = {dataset.geometry.node_count(), dataset.geometry.node_count() / 10,
                  dataset.geometry.node_count() / 40, dataset.geometry.node_count() / 100,
                  dataset.geometry.node_count() / 200};
      const SparsityReport report =
          sparsity_sweep(*model, dataset, counts, cfg.observation_noise_std, args.noise_seed,
                         cfg.inversion, global.threads);
      write_report(report.to_csv(), report.summary());
      write_heatmaps(*model, dataset);
      return;
    }

    if (args.kind == "latent-sweep") {
      require_file(args.dataset, "dataset");
      const Dataset dataset = load_dataset(args.dataset);
      std::vector<int> dims = args.dims;
      if (dims.empty()) dims = {5, 10, 20, 40};
      const LatentSweepReport report = latent_dim_sweep(
          dataset, dims, cfg.architecture, cfg.training, args.n_test, cfg.inversion,
          cfg.observation_noise_std, args.noise_seed, global.threads);
      write_report(report.to_csv(), report.summary());
      return;
    }

    if (args.kind == "mahalanobis") {
      require_file(args.model, "model");
      require_file(args.dataset, "dataset");
      if (args.test_datasets.empty())
        throw ValidationError("diagnose mahalanobis: at least one --test-dataset required");
      const SveModel model = load_sve_model(args.model);
      const Dataset train = load_dataset(args.dataset);
      std::vector<int> train_records(train.records.size());
      for (std::size_t i = 0; i < train_records.size(); ++i)
        train_records[i] = static_cast<int>(i);
      const TrainStats stats_u = stats_of_field(train, train_records, 'u');
      const TrainStats stats_v = stats_of_field(train, train_records, 'v');
      const TrainStats stats_z = stats_of_latents(model, train, train_records);
      std::vector<Dataset> test_sets;
      std::vector<std::pair<std::string, const Dataset*>> labeled;
      test_sets.reserve(args.test_datasets.size());
      for (const auto& path : args.test_datasets) {
        require_file(path, "test dataset");
        test_sets.push_back(load_dataset(path));
      }
      for (std::size_t i = 0; i < test_sets.size(); ++i)
        labeled.emplace_back(args.test_datasets[i].stem().string(), &test_sets[i]);
      const ShiftReport report =
          shift_report(model, labeled, stats_u, stats_v, stats_z, cfg.inversion,
                       cfg.observation_noise_std, args.noise_seed, global.threads);
      write_report(report.to_csv(), report.summary());
      write_heatmaps(model, test_sets.front());
      return;
    }

    throw ValidationError("diagnose: unknown kind '" + args.kind +
                          "' (expected hessian|mahalanobis|sparsity|latent-sweep)");
  });
}

}  // namespace bathyrom
