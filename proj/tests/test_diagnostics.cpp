#include <doctest.h>

#include "bathyrom/diagnostics.hpp"
#include "bathyrom/metrics.hpp"
#include "test_support.hpp"

using namespace bathyrom;

TEST_CASE("mahalanobis: center, scalar case, diagonal oracle") {
  SUBCASE("distance at the mean is zero") {
    Rng rng(2);
    Eigen::MatrixXd samples(40, 6);
    for (int r = 0; r < 40; ++r)
      for (int c = 0; c < 6; ++c) samples(r, c) = rng.normal() * (1.0 + c);
    const TrainStats stats = compute_train_stats(samples, 6);
    CHECK(mahalanobis(stats.mean, stats) == 0.0);
  }
  SUBCASE("one-dimensional reduction to |x - mu| / sigma") {
    Rng rng(5);
    Eigen::MatrixXd samples(5000, 1);
    const double mu = 2.0, sigma = 0.7;
    for (int r = 0; r < 5000; ++r) samples(r, 0) = mu + sigma * rng.normal();
    const TrainStats stats = compute_train_stats(samples, 1, 1e-10);
    Eigen::VectorXd x(1);
    x << 3.5;
    const double sample_sigma = std::sqrt(stats.eigenvalues[0]);
    CHECK(mahalanobis(x, stats) ==
          doctest::Approx(std::abs(3.5 - stats.mean[0]) / sample_sigma).epsilon(1e-6));
  }
  SUBCASE("three-dimensional diagonal fixture matches hand algebra") {
    // Build stats directly: mean and eigenpairs chosen by hand.
    TrainStats stats;
    stats.mean = Eigen::Vector3d{1.0, -1.0, 0.5};
    stats.eigenvalues = Eigen::Vector3d{4.0, 1.0, 0.25};
    stats.eigenvectors = Eigen::Matrix3d::Identity();
    stats.nugget = 1e-9;
    const Eigen::Vector3d x{2.0, 0.0, 0.5};
    // d^2 = (1/3) * (1^2/4 + 1^2/1 + 0) with nugget-corrected lambdas
    const double expected =
        std::sqrt((1.0 / (4.0 + 1e-9) + 1.0 / (1.0 + 1e-9)) / 3.0);
    CHECK(mahalanobis(x, stats) == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("mahalanobis is invariant under simultaneous diagonal rescaling") {
  TrainStats stats;
  stats.mean = Eigen::Vector3d{0.5, 1.5, -2.0};
  stats.eigenvalues = Eigen::Vector3d{2.0, 1.0, 0.5};
  stats.eigenvectors = Eigen::Matrix3d::Identity();
  stats.nugget = 1e-12;
  const Eigen::Vector3d x{1.0, 2.0, -1.0};
  const double before = mahalanobis(x, stats);

  const Eigen::Vector3d scale{2.0, 0.5, 3.0};
  TrainStats scaled = stats;
  scaled.mean = stats.mean.cwiseProduct(scale);
  scaled.eigenvalues = stats.eigenvalues.cwiseProduct(scale.cwiseProduct(scale));
  // diagonal case keeps eigenvectors axis-aligned
  const double after = mahalanobis(x.cwiseProduct(scale), scaled);
  CHECK(after == doctest::Approx(before).epsilon(1e-9));
}

TEST_CASE("hessian_spectrum: quadratic exactness and h-independence") {
  Eigen::Matrix3d a;
  a << 4.0, 1.0, 0.0, 1.0, 3.0, -0.5, 0.0, -0.5, 2.0;
  auto loss = [&a](const Eigen::VectorXd& z) { return 0.5 * z.dot(a * z); };
  const Eigen::VectorXd z0 = Eigen::Vector3d{0.3, -0.1, 0.2};

  const Eigen::VectorXd s1 = hessian_spectrum(loss, z0, 1e-3);
  const Eigen::VectorXd s2 = hessian_spectrum(loss, z0, 1e-4);
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(a);
  // eigenvalues ascending; singular values descending
  for (int i = 0; i < 3; ++i) {
    CHECK(s1[i] == doctest::Approx(std::abs(eig.eigenvalues()[2 - i])).epsilon(1e-6));
    CHECK(std::abs(s1[i] - s2[i]) < 1e-6);
  }
}

TEST_CASE("model hessian: affine decoder matches the Gauss-Newton closed form") {
  const ChannelGeometry g{3, 4, 1.0, 1.0};
  SveArchitecture arch;
  arch.latent_dim = 3;
  arch.encoder_widths = {8};
  arch.decoder_widths = {};
  const SveModel model = SveModel::initialize(g, arch, Normalization{}, 12);
  const BoundaryConditions bc{0.0, 0.0};
  const Eigen::VectorXd z = Eigen::Vector3d{0.1, 0.2, -0.3};

  const Eigen::VectorXd spectrum = model_hessian_spectrum(model, LossTerm::kU, z, bc, 1e-3);
  // loss = |A (z' - z)|^2 / m with A the u-head latent block; Hessian = 2 A^T A / m
  const Eigen::MatrixXd a = model.decoder().heads[0].w.leftCols(3);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
      2.0 * a.transpose() * a / static_cast<double>(g.node_count()));
  for (int i = 0; i < 3; ++i)
    CHECK(spectrum[i] == doctest::Approx(eig.eigenvalues()[2 - i]).epsilon(1e-5));
}

TEST_CASE("trained mini model: velocity spectra decay before the bathymetry spectrum") {
  const SveModel& model = test::shared_mini_model();
  const BoundaryConditions bc{100.0, 2.5};
  const Eigen::VectorXd z = Eigen::VectorXd::Zero(model.latent_dim());
  auto decay_index = [](const Eigen::VectorXd& s) {
    const double cut = 0.01 * s[0];
    for (Eigen::Index i = 0; i < s.size(); ++i)
      if (s[i] < cut) return static_cast<int>(i);
    return static_cast<int>(s.size());
  };
  const int idx_u =
      decay_index(model_hessian_spectrum(model, LossTerm::kU, z, bc, 1e-3));
  const int idx_v =
      decay_index(model_hessian_spectrum(model, LossTerm::kV, z, bc, 1e-3));
  const int idx_s =
      decay_index(model_hessian_spectrum(model, LossTerm::kS, z, bc, 1e-3));
  CHECK(std::max(idx_u, idx_v) <= idx_s);
}

TEST_CASE("sparsity sweep: full-mask entry matches a direct evaluation") {
  const SveModel& model = test::shared_mini_model();
  const Dataset test = test::mini_dataset(6, 99);
  const int full = test.geometry.node_count();
  const SparsityReport report =
      sparsity_sweep(model, test, {full, full / 10}, 0.05, 5, InversionOptions{}, 2);
  REQUIRE(report.entries.size() == 2);
  CHECK(report.entries[0].actual_points == full);

  std::vector<int> records{0, 1, 2, 3, 4, 5};
  const std::vector<double> direct =
      inversion_rmse(model, test, records, full_mask(test.geometry), 0.05,
                     derive_seed(5, 0), InversionOptions{}, 2);
  CHECK(report.entries[0].rmse_mean == doctest::Approx(mean_of(direct)).epsilon(1e-12));
  CHECK(report.entries[0].per_sample == direct);

  CHECK_THROWS_AS(
      sparsity_sweep(model, test, {10, 20}, 0.05, 5, InversionOptions{}, 1),
      ValidationError);
}

TEST_CASE("latent sweep: duplicated dims give identical results") {
  Dataset data = test::mini_dataset(60, 7);
  SveArchitecture arch = test::mini_architecture();
  TrainHyper hyper = test::mini_hyper(6);
  const LatentSweepReport report = latent_dim_sweep(
      data, {4, 4}, arch, hyper, 8, InversionOptions{}, 0.05, 3, 2);
  REQUIRE(report.entries.size() == 2);
  CHECK(report.entries[0].per_sample == report.entries[1].per_sample);
  CHECK(report.entries[0].forward.s == report.entries[1].forward.s);
  CHECK(!report.to_csv().empty());
  CHECK(!report.summary().empty());
}

TEST_CASE("shift report: identical test set distribution gives matching clusters") {
  const SveModel& model = test::shared_mini_model();
  const Dataset& train = test::shared_mini_data();
  std::vector<int> train_records;
  for (int i = 0; i < 100; ++i) train_records.push_back(i);
  const TrainStats stats_u = stats_of_field(train, train_records, 'u', 60);
  const TrainStats stats_v = stats_of_field(train, train_records, 'v', 60);
  const TrainStats stats_z = stats_of_latents(model, train, train_records);

  const Dataset a = test::mini_dataset(12, 501);
  const Dataset b = test::mini_dataset(12, 502);  // same distribution, fresh draws
  const ShiftReport report =
      shift_report(model, {{"a", &a}, {"b", &b}}, stats_u, stats_v, stats_z,
                   InversionOptions{}, 0.05, 17, 2);
  REQUIRE(report.clusters.size() == 2);
  const auto& ca = report.clusters[0].mean;
  const auto& cb = report.clusters[1].mean;
  // same-distribution clusters coincide within sampling noise
  CHECK(std::abs(ca.mahal_u - cb.mahal_u) / ca.mahal_u < 0.35);
  CHECK(std::abs(ca.rmse - cb.rmse) / ca.rmse < 0.35);
  CHECK(!report.to_csv().empty());
}

TEST_CASE("shifted sigmas order both distance and error") {
  const SveModel& model = test::shared_mini_model();
  const Dataset& train = test::shared_mini_data();
  std::vector<int> train_records;
  for (int i = 0; i < 100; ++i) train_records.push_back(i);
  const TrainStats stats_u = stats_of_field(train, train_records, 'u', 60);
  const TrainStats stats_v = stats_of_field(train, train_records, 'v', 60);
  const TrainStats stats_z = stats_of_latents(model, train, train_records);

  std::vector<Dataset> sets;
  std::vector<std::pair<std::string, const Dataset*>> labeled;
  const std::vector<double> sigmas{1.2, 2.13, 3.05, 4.57};
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    PriorSpec prior = test::mini_prior();
    prior.kernel.sigma = sigmas[i];
    sets.push_back(generate_dataset(test::mini_geometry(), prior, BcRanges{},
                                    ForwardParams{}, 10, 600 + i, 2)
                       .dataset);
  }
  for (std::size_t i = 0; i < sets.size(); ++i)
    labeled.emplace_back("sigma" + std::to_string(i), &sets[i]);
  const ShiftReport report = shift_report(model, labeled, stats_u, stats_v, stats_z,
                                          InversionOptions{}, 0.05, 23, 2);
  // The latent distance and the error are robust at this reduced scale;
  // the field-space panels need the full desk configuration (they are
  // exercised by the acceptance suite).
  for (std::size_t i = 1; i < report.clusters.size(); ++i) {
    CHECK(report.clusters[i].mean.mahal_z > report.clusters[i - 1].mean.mahal_z);
    CHECK(report.clusters[i].mean.rmse > report.clusters[i - 1].mean.rmse);
  }
}

TEST_CASE("train stats guardrails") {
  Eigen::MatrixXd one_sample(1, 4);
  CHECK_THROWS_AS(compute_train_stats(one_sample, 2), ValidationError);
  Rng rng(9);
  Eigen::MatrixXd samples(10, 4);
  for (int r = 0; r < 10; ++r)
    for (int c = 0; c < 4; ++c) samples(r, c) = rng.normal();
  const TrainStats stats = compute_train_stats(samples, 100);
  CHECK(stats.eigenvalues.size() == 4);  // capped at min(N - 1, dim)
  Eigen::VectorXd bad(3);
  CHECK_THROWS_AS(mahalanobis(bad, stats), ValidationError);
}
