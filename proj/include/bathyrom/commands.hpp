#ifndef BATHYROM_COMMANDS_HPP
#define BATHYROM_COMMANDS_HPP

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace bathyrom {

/// Exit statuses shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

struct GlobalOptions {
  int threads = 1;
};

int cmd_generate(const std::filesystem::path& config_path, int n, std::uint64_t seed,
                 const std::filesystem::path& out, const GlobalOptions& global,
                 std::ostream& log);

/// rom_kind and latent_dim override the config (pass an empty config path
/// to run on defaults).
int cmd_train(const std::filesystem::path& dataset_path, const std::string& rom_kind,
              int latent_dim, const std::filesystem::path& out,
              const std::filesystem::path& config_path, const GlobalOptions& global,
              std::ostream& log);

struct InvertArgs {
  std::filesystem::path model;
  std::filesystem::path dataset;       // with record/mask_points/noise_seed
  int record = 0;
  int mask_points = 0;                 // 0 selects the full grid
  std::uint64_t noise_seed = 1;
  std::filesystem::path observations;  // alternative to the dataset route
  std::filesystem::path config;        // optional
  std::filesystem::path out;
};

int cmd_invert(const InvertArgs& args, const GlobalOptions& global, std::ostream& log);

struct EvaluateArgs {
  std::filesystem::path model;
  std::filesystem::path dataset;
  std::filesystem::path test_dataset;  // optional extra column
  int mask_points = 0;
  int max_records = 0;  // 0 evaluates everything
  std::uint64_t noise_seed = 1;
  std::filesystem::path config;
};

int cmd_evaluate(const EvaluateArgs& args, const GlobalOptions& global, std::ostream& log);

struct DiagnoseArgs {
  std::string kind;  // hessian | mahalanobis | sparsity | latent-sweep
  std::filesystem::path model;
  std::filesystem::path dataset;
  std::vector<std::filesystem::path> test_datasets;
  std::filesystem::path config;
  std::filesystem::path out_prefix = "diagnose";
  std::vector<int> counts;  // sparsity
  std::vector<int> dims;    // latent sweep
  int n_test = 20;
  double fd_step = 1e-3;    // hessian
  std::uint64_t noise_seed = 1;
};

int cmd_diagnose(const DiagnoseArgs& args, const GlobalOptions& global, std::ostream& log);

}  // namespace bathyrom

#endif  // BATHYROM_COMMANDS_HPP
