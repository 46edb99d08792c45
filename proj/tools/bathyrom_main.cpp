#include <CLI11.hpp>
#include <iostream>

#include "bathyrom/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"latent-space Bayesian inversion for riverine bathymetry"};
  app.require_subcommand(1);

  bathyrom::GlobalOptions global;
  app.add_option("--threads", global.threads, "worker thread cap")->capture_default_str();

  // generate
  std::string gen_config, gen_out;
  int gen_n = 0;
  std::uint64_t gen_seed = 1;
  auto* generate = app.add_subcommand("generate", "sample a synthetic dataset");
  generate->add_option("--config", gen_config, "run configuration")->required();
  generate->add_option("--n", gen_n, "record count")->required();
  generate->add_option("--seed", gen_seed, "generation seed")->required();
  generate->add_option("--out", gen_out, "output .vgd path")->required();

  // train
  std::string train_dataset, train_rom, train_out, train_config;
  int train_k = 0;
  auto* train = app.add_subcommand("train", "fit a reduced-order model");
  train->add_option("--dataset", train_dataset, "training .vgd path")->required();
  train->add_option("--rom", train_rom, "sve or pca")->required();
  train->add_option("--latent-dim", train_k, "latent dimension")->required();
  train->add_option("--out", train_out, "output .vgm path")->required();
  train->add_option("--config", train_config, "run configuration (optional)");

  // invert
  bathyrom::InvertArgs inv;
  std::string inv_model, inv_dataset, inv_obs, inv_config, inv_out;
  auto* invert = app.add_subcommand("invert", "recover bathymetry from observations");
  invert->add_option("--model", inv_model, "trained .vgm path")->required();
  invert->add_option("--dataset", inv_dataset, "dataset to draw a record from");
  invert->add_option("--record", inv.record, "record index")->capture_default_str();
  invert->add_option("--mask-points", inv.mask_points, "observation points (0 = full)")
      ->capture_default_str();
  invert->add_option("--noise-seed", inv.noise_seed, "observation noise seed")
      ->capture_default_str();
  invert->add_option("--obs", inv_obs, "pre-built .vgo observations (alternative)");
  invert->add_option("--config", inv_config, "run configuration (optional)");
  invert->add_option("--out", inv_out, "output .vgr path")->required();

  // evaluate
  bathyrom::EvaluateArgs eval;
  std::string eval_model, eval_dataset, eval_test, eval_config;
  auto* evaluate = app.add_subcommand("evaluate", "inversion error table over splits");
  evaluate->add_option("--model", eval_model, "trained .vgm path")->required();
  evaluate->add_option("--dataset", eval_dataset, "dataset to evaluate")->required();
  evaluate->add_option("--mask-points", eval.mask_points, "observation points (0 = full)")
      ->capture_default_str();
  evaluate->add_option("--test-dataset", eval_test, "held-out dataset (optional)");
  evaluate->add_option("--max-records", eval.max_records, "cap per split (0 = all)")
      ->capture_default_str();
  evaluate->add_option("--noise-seed", eval.noise_seed, "observation noise seed")
      ->capture_default_str();
  evaluate->add_option("--config", eval_config, "run configuration (optional)");

  // diagnose
  bathyrom::DiagnoseArgs diag;
  std::string diag_model, diag_dataset, diag_config, diag_prefix = "diagnose";
  std::vector<std::string> diag_tests;
  auto* diagnose =
      app.add_subcommand("diagnose", "hessian | mahalanobis | sparsity | latent-sweep");
  diagnose->add_option("kind", diag.kind, "diagnostic kind")->required();
  diagnose->add_option("--model", diag_model, "trained .vgm path");
  diagnose->add_option("--dataset", diag_dataset, "dataset path");
  diagnose->add_option("--test-dataset", diag_tests, "test dataset(s)");
  diagnose->add_option("--counts", diag.counts, "observation counts (sparsity)");
  diagnose->add_option("--dims", diag.dims, "latent dimensions (latent-sweep)");
  diagnose->add_option("--n-test", diag.n_test, "held-out records (latent-sweep)")
      ->capture_default_str();
  diagnose->add_option("--fd-step", diag.fd_step, "hessian step")->capture_default_str();
  diagnose->add_option("--noise-seed", diag.noise_seed, "observation noise seed")
      ->capture_default_str();
  diagnose->add_option("--out-prefix", diag_prefix, "report path prefix")
      ->capture_default_str();
  diagnose->add_option("--config", diag_config, "run configuration (optional)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : bathyrom::kExitValidation;
  }

  if (generate->parsed())
    return bathyrom::cmd_generate(gen_config, gen_n, gen_seed, gen_out, global, std::cout);
  if (train->parsed())
    return bathyrom::cmd_train(train_dataset, train_rom, train_k, train_out, train_config,
                               global, std::cout);
  if (invert->parsed()) {
    inv.model = inv_model;
    inv.dataset = inv_dataset;
    inv.observations = inv_obs;
    inv.config = inv_config;
    inv.out = inv_out;
    return bathyrom::cmd_invert(inv, global, std::cout);
  }
  if (evaluate->parsed()) {
    eval.model = eval_model;
    eval.dataset = eval_dataset;
    eval.test_dataset = eval_test;
    eval.config = eval_config;
    return bathyrom::cmd_evaluate(eval, global, std::cout);
  }
  if (diagnose->parsed()) {
    diag.model = diag_model;
    diag.dataset = diag_dataset;
    diag.config = diag_config;
    diag.out_prefix = diag_prefix;
    diag.test_datasets.assign(diag_tests.begin(), diag_tests.end());
    return bathyrom::cmd_diagnose(diag, global, std::cout);
  }
  return bathyrom::kExitValidation;
}
