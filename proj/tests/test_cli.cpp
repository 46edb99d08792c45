#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bathyrom/config.hpp"

using namespace bathyrom;
namespace fs = std::filesystem;

namespace {

const char* kTinyConfig = R"(# reduced configuration for command tests
geometry.n_across = 7
geometry.n_along = 25
geometry.dx = 40.0
geometry.dy = 8.0
prior.n_modes = 40
rom.latent_dim = 4
rom.encoder_widths = 32
rom.decoder_widths = 32
rom.epochs = 8
rom.batch_size = 8
inversion.uq_samples = 50
)";

struct Workspace {
  fs::path dir;
  Workspace() {
    dir = fs::temp_directory_path() / "bathyrom_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }
  [[nodiscard]] fs::path file(const std::string& name) const { return dir / name; }
};

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(BATHYROM_BIN) + " " + args + " > " +
                          log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::vector<char> bytes_of(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("config parser: values, defaults, rejection of unknown keys") {
  const RunConfig cfg = parse_config_text(kTinyConfig);
  CHECK(cfg.geometry.n_across == 7);
  CHECK(cfg.architecture.latent_dim == 4);
  CHECK(cfg.architecture.encoder_widths == std::vector<int>{32});
  CHECK(cfg.training.epochs == 8);
  CHECK(cfg.prior.kernel.sigma == 1.2);  // untouched default

  CHECK_THROWS_WITH_AS(parse_config_text("geometry.bogus = 3\n"),
                       doctest::Contains("unknown key 'geometry.bogus'"), ValidationError);
  CHECK_THROWS_WITH_AS(parse_config_text("geometry.dx = fast\n"),
                       doctest::Contains("expects a number"), ValidationError);
  CHECK_THROWS_WITH_AS(parse_config_text("inversion.max_iterations = 0\n"),
                       doctest::Contains("max_iterations"), ValidationError);
  CHECK_THROWS_AS(parse_config_text("just some words\n"), ValidationError);
}

TEST_CASE("command pipeline on a reduced configuration") {
  Workspace ws;
  const fs::path config = ws.file("tiny.cfg");
  std::ofstream(config) << kTinyConfig;
  const fs::path log = ws.file("log.txt");

  // generate twice with the same seed: byte-identical datasets
  const fs::path data_a = ws.file("a.vgd"), data_b = ws.file("b.vgd");
  REQUIRE(run("generate --config " + config.string() + " --n 24 --seed 5 --out " +
                  data_a.string(),
              log) == 0);
  CHECK(slurp(log).find("generated 24 records") != std::string::npos);
  REQUIRE(run("generate --config " + config.string() + " --n 24 --seed 5 --out " +
                  data_b.string(),
              log) == 0);
  CHECK(bytes_of(data_a) == bytes_of(data_b));

  // train both model kinds
  const fs::path sve = ws.file("model_sve.vgm");
  REQUIRE(run("train --dataset " + data_a.string() + " --rom sve --latent-dim 4 --out " +
                  sve.string() + " --config " + config.string(),
              log) == 0);
  CHECK(slurp(log).find("validation reconstruction rmse") != std::string::npos);
  const fs::path pca = ws.file("model_pca.vgm");
  REQUIRE(run("train --dataset " + data_a.string() + " --rom pca --latent-dim 4 --out " +
                  pca.string() + " --config " + config.string(),
              log) == 0);

  // invert one record; repeated runs are byte-identical
  const fs::path res_a = ws.file("res_a.vgr"), res_b = ws.file("res_b.vgr");
  REQUIRE(run("invert --model " + sve.string() + " --dataset " + data_a.string() +
                  " --record 3 --noise-seed 11 --config " + config.string() + " --out " +
                  res_a.string(),
              log) == 0);
  const std::string invert_log = slurp(log);
  CHECK(invert_log.find("bathymetry rmse vs truth") != std::string::npos);
  REQUIRE(run("invert --model " + sve.string() + " --dataset " + data_a.string() +
                  " --record 3 --noise-seed 11 --config " + config.string() + " --out " +
                  res_b.string(),
              log) == 0);
  CHECK(bytes_of(res_a) == bytes_of(res_b));

  // evaluate on the training dataset prints the split table
  REQUIRE(run("evaluate --model " + sve.string() + " --dataset " + data_a.string() +
                  " --max-records 4 --config " + config.string(),
              log) == 0);
  CHECK(slurp(log).find("training set") != std::string::npos);

  // diagnose: sparsity sweep writes csv + txt + heatmaps
  const fs::path prefix = ws.file("sparsity");
  REQUIRE(run("diagnose sparsity --model " + sve.string() + " --dataset " +
                  data_a.string() + " --counts 175 --counts 20 --config " +
                  config.string() + " --out-prefix " + prefix.string(),
              log) == 0);
  CHECK(fs::exists(ws.file("sparsity.csv")));
  CHECK(fs::exists(ws.file("sparsity.txt")));
  CHECK(fs::exists(ws.file("sparsity_truth.pgm")));
  CHECK(fs::exists(ws.file("sparsity_std.pgm")));
  const std::string pgm_head = slurp(ws.file("sparsity_truth.pgm")).substr(0, 2);
  CHECK(pgm_head == "P5");
}

TEST_CASE("command validation failures exit with status 1") {
  Workspace ws;
  const fs::path log = ws.file("log.txt");
  const fs::path config = ws.file("tiny.cfg");
  std::ofstream(config) << kTinyConfig;

  SUBCASE("invalid config key is named") {
    const fs::path bad = ws.file("bad.cfg");
    std::ofstream(bad) << "prior.sgima = 1.0\n";
    CHECK(run("generate --config " + bad.string() + " --n 2 --seed 1 --out " +
                  ws.file("x.vgd").string(),
              log) == 1);
    CHECK(slurp(log).find("prior.sgima") != std::string::npos);
    CHECK(!fs::exists(ws.file("x.vgd")));  // no partial artifact
  }
  SUBCASE("missing dataset") {
    CHECK(run("train --dataset " + ws.file("nope.vgd").string() +
                  " --rom sve --latent-dim 4 --out " + ws.file("m.vgm").string(),
              log) == 1);
  }
  SUBCASE("max_iterations = 0 rejected at config parse") {
    const fs::path bad = ws.file("bad_iter.cfg");
    std::ofstream(bad) << "inversion.max_iterations = 0\n";
    CHECK(run("generate --config " + bad.string() + " --n 2 --seed 1 --out " +
                  ws.file("y.vgd").string(),
              log) == 1);
  }
  SUBCASE("unknown diagnose kind prints usage") {
    CHECK(run("diagnose nonsense", log) == 1);
    CHECK(slurp(log).find("hessian|mahalanobis|sparsity|latent-sweep") != std::string::npos);
  }
  SUBCASE("evaluate with an empty test split") {
    // a dataset file cannot be empty by construction; removing it instead
    CHECK(run("evaluate --model " + ws.file("m.vgm").string() + " --dataset " +
                  ws.file("nope.vgd").string(),
              log) == 1);
  }
}
