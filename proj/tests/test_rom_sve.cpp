#include <doctest.h>

#include <filesystem>

#include "bathyrom/inversion.hpp"
#include "bathyrom/metrics.hpp"
#include "bathyrom/model_io.hpp"
#include "test_support.hpp"

using namespace bathyrom;
using test::mini_architecture;
using test::mini_dataset;
using test::mini_geometry;
using test::mini_hyper;

namespace {

/// Model with zeroed weights and chosen encoder head biases; useful for
/// pinning mu and log_var independent of the input.
SveModel biased_encoder_model(const Eigen::VectorXd& mu_bias,
                              const Eigen::VectorXd& lv_bias) {
  const ChannelGeometry g = mini_geometry();
  SveArchitecture arch = mini_architecture(static_cast<int>(mu_bias.size()));
  SveModel model = SveModel::initialize(g, arch, Normalization{}, 3);
  SveModel copy = model;
  FeedForward encoder = model.encoder();
  for (auto& l : encoder.trunk) {
    l.w.setZero();
    l.b.setZero();
  }
  encoder.heads[0].w.setZero();
  encoder.heads[0].b = mu_bias;
  encoder.heads[1].w.setZero();
  encoder.heads[1].b = lv_bias;
  return SveModel(g, arch, Normalization{}, encoder, model.decoder());
}

}  // namespace

TEST_CASE("encode: zeroed weights return the head biases; passes are deterministic") {
  const int k = 4;
  Eigen::VectorXd mu_bias(k), lv_bias(k);
  mu_bias << 0.5, -1.0, 2.0, 0.0;
  lv_bias << 0.0, 0.1, -0.2, 0.3;
  const SveModel model = biased_encoder_model(mu_bias, lv_bias);
  const BathymetryField bathy{mini_geometry(),
                              Eigen::MatrixXd::Random(11, 41)};
  const BoundaryConditions bc{80.0, 2.5};
  const LatentGaussian a = model.encode(bathy, bc);
  const LatentGaussian b = model.encode(bathy, bc);
  // Softplus of zero pre-activations is a constant through the trunk, so
  // only the head biases + constant-path contributions appear; with the
  // head weights zeroed the outputs are exactly the biases.
  CHECK((a.mu - mu_bias).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.log_var - lv_bias).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.mu == b.mu);
  CHECK(a.log_var == b.log_var);

  BathymetryField wrong{ChannelGeometry{5, 7, 1.0, 1.0}, Eigen::MatrixXd::Zero(5, 7)};
  CHECK_THROWS_AS(model.encode(wrong, bc), ValidationError);
}

TEST_CASE("reparameterize: collapse, determinism, moments") {
  LatentGaussian g;
  g.mu = Eigen::VectorXd::LinSpaced(5, -1.0, 1.0);
  g.log_var = Eigen::VectorXd::Constant(5, -50.0);
  SUBCASE("log_var -> -inf collapses to mu") {
    const Eigen::VectorXd z = reparameterize(g, 99);
    CHECK((z - g.mu).cwiseAbs().maxCoeff() < 1e-9);
  }
  SUBCASE("fixed seed reproduces") {
    g.log_var.setConstant(0.2);
    CHECK(reparameterize(g, 5) == reparameterize(g, 5));
  }
  SUBCASE("sample moments match mu and exp(log_var/2)") {
    g.log_var.setConstant(0.4);
    const int n = 10000;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(5), sumsq = Eigen::VectorXd::Zero(5);
    for (int s = 0; s < n; ++s) {
      const Eigen::VectorXd z = reparameterize(g, 100 + static_cast<std::uint64_t>(s));
      sum += z;
      sumsq += z.cwiseProduct(z);
    }
    const Eigen::VectorXd mean = sum / n;
    const Eigen::VectorXd std_dev =
        (sumsq / n - mean.cwiseProduct(mean)).cwiseSqrt();
    const double want_std = std::exp(0.2);
    for (int i = 0; i < 5; ++i) {
      // 4 standard errors of the Monte Carlo mean
      CHECK(std::abs(mean[i] - g.mu[i]) < 4.0 * want_std / 100.0);
      CHECK(std_dev[i] == doctest::Approx(want_std).epsilon(0.03));
    }
  }
}

TEST_CASE("decode: affine fixture is exactly W z + b") {
  const ChannelGeometry g = mini_geometry();
  SveArchitecture arch = mini_architecture(3);
  arch.decoder_widths = {};  // heads read the latent directly
  const SveModel model = SveModel::initialize(g, arch, Normalization{}, 11);
  const BoundaryConditions bc{0.0, 0.0};  // normalized BCs are zero under identity norms

  Eigen::VectorXd z(3);
  z << 0.4, -1.2, 0.9;
  const Rom::Decoded out = model.decode(z, bc);
  const Eigen::VectorXd input = model.decoder_input(z, bc);
  for (int h = 0; h < 3; ++h) {
    const Eigen::VectorXd expected =
        model.decoder().heads[static_cast<std::size_t>(h)].w * input +
        model.decoder().heads[static_cast<std::size_t>(h)].b;
    const Eigen::MatrixXd& field = h == 0 ? out.u : h == 1 ? out.v : out.s;
    CHECK((flatten(field) - expected).cwiseAbs().maxCoeff() < 1e-14);
  }
  CHECK_THROWS_AS(model.decode(Eigen::VectorXd::Zero(2), bc), ValidationError);
}

TEST_CASE("decode_bathymetry agrees with the full decode") {
  const SveModel& model = test::shared_mini_model();
  const BoundaryConditions bc{90.0, 2.4};
  const Eigen::VectorXd z = Eigen::VectorXd::Random(model.latent_dim());
  CHECK((model.decode_bathymetry(z, bc) - model.decode(z, bc).s).cwiseAbs().maxCoeff() <
        1e-12);
}

TEST_CASE("sve_loss: KL fixtures") {
  const int k = 3;
  SUBCASE("mu = 0, log_var = 0 gives zero KL for any batch") {
    const SveModel model =
        biased_encoder_model(Eigen::VectorXd::Zero(k), Eigen::VectorXd::Zero(k));
    const Dataset data = test::shared_mini_data();
    const SveLossTerms terms = sve_loss(model, data, {0, 1, 2});
    CHECK(terms.kl == 0.0);
    CHECK(terms.total ==
          doctest::Approx(terms.u + terms.v + terms.s).epsilon(1e-15));
  }
  SUBCASE("KL matches the per-component formula") {
    Eigen::VectorXd mu(k), lv(k);
    mu << 0.3, -0.6, 1.1;
    lv << 0.2, -0.4, 0.0;
    const SveModel model = biased_encoder_model(mu, lv);
    const Dataset data = test::shared_mini_data();
    const SveLossTerms terms = sve_loss(model, data, {0, 4});
    double expected = 0.0;
    for (int i = 0; i < k; ++i)
      expected += 0.5 * (std::exp(lv[i]) + mu[i] * mu[i] - 1.0 - lv[i]);
    CHECK(terms.kl == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("sve_loss gradients match central finite differences") {
  // Tiny network (under 500 parameters) over a handful of records.
  const ChannelGeometry g{3, 5, 10.0, 4.0};
  Dataset data;
  data.geometry = g;
  Rng rng(8);
  for (int r = 0; r < 4; ++r) {
    BathymetryField bathy{g, Eigen::MatrixXd(3, 5)};
    FlowField flow{g, Eigen::MatrixXd(3, 5), Eigen::MatrixXd(3, 5), Eigen::MatrixXd(3, 5),
                   Eigen::VectorXd::Zero(5)};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 5; ++j) {
        bathy.bed_elevation(i, j) = rng.normal();
        flow.u(i, j) = rng.normal();
        flow.v(i, j) = rng.normal();
        flow.depth(i, j) = 1.0;
      }
    data.add_record(bathy, BoundaryConditions{60.0 + r, 2.0 + 0.1 * r}, flow);
  }
  SveArchitecture arch;
  arch.latent_dim = 2;
  arch.encoder_widths = {6};
  arch.decoder_widths = {5};
  arch.kl_weight = 0.37;
  const Normalization norm = fit_normalization(data, {0, 1, 2, 3});
  SveModel model = SveModel::initialize(g, arch, norm, 15);
  REQUIRE(model.encoder().parameter_count() + model.decoder().parameter_count() <= 500);

  const std::vector<int> batch{0, 1, 2, 3};
  Eigen::MatrixXd xi(2, 4);
  Rng xirng(77);
  for (int c = 0; c < 4; ++c)
    for (int r = 0; r < 2; ++r) xi(r, c) = xirng.normal();

  const std::vector<const Eigen::MatrixXd*> noise_cases{nullptr, &xi};
  for (const Eigen::MatrixXd* noise : noise_cases) {
    FeedForwardGrads enc = FeedForwardGrads::zeros_like(model.encoder());
    FeedForwardGrads dec = FeedForwardGrads::zeros_like(model.decoder());
    sve_loss_and_grads(model, data, batch, noise, enc, dec);
    const Eigen::VectorXd analytic_enc = flatten_grads(enc);
    const Eigen::VectorXd analytic_dec = flatten_grads(dec);

    auto loss_at = [&](const SveModel& m) { return sve_loss(m, data, batch, noise).total; };
    const double h = 1e-5;
    // encoder parameters
    {
      FeedForward net = model.encoder();
      const Eigen::VectorXd params = flatten_parameters(net);
      for (Eigen::Index p = 0; p < params.size(); ++p) {
        Eigen::VectorXd shifted = params;
        shifted[p] += h;
        unflatten_parameters(net, shifted);
        SveModel up(model.geometry(), arch, norm, net, model.decoder());
        shifted[p] = params[p] - h;
        unflatten_parameters(net, shifted);
        SveModel down(model.geometry(), arch, norm, net, model.decoder());
        const double fd = (loss_at(up) - loss_at(down)) / (2.0 * h);
        CHECK(std::abs(analytic_enc[p] - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
        unflatten_parameters(net, params);
      }
    }
    // decoder parameters
    {
      FeedForward net = model.decoder();
      const Eigen::VectorXd params = flatten_parameters(net);
      for (Eigen::Index p = 0; p < params.size(); ++p) {
        Eigen::VectorXd shifted = params;
        shifted[p] += h;
        unflatten_parameters(net, shifted);
        SveModel up(model.geometry(), arch, norm, model.encoder(), net);
        shifted[p] = params[p] - h;
        unflatten_parameters(net, shifted);
        SveModel down(model.geometry(), arch, norm, model.encoder(), net);
        const double fd = (loss_at(up) - loss_at(down)) / (2.0 * h);
        CHECK(std::abs(analytic_dec[p] - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
        unflatten_parameters(net, params);
      }
    }
  }
}

TEST_CASE("train_sve: epochs=0 keeps the initialized weights") {
  const Dataset& data = test::shared_mini_data();
  const SveModel trained = train_sve(data, mini_architecture(), mini_hyper(0));
  const auto [train_idx, val_idx] = split_indices(150, 0.1, 7);
  const Normalization norm = fit_normalization(data, train_idx);
  const SveModel fresh =
      SveModel::initialize(data.geometry, mini_architecture(), norm, 7);
  CHECK(flatten_parameters(trained.encoder()) == flatten_parameters(fresh.encoder()));
  CHECK(flatten_parameters(trained.decoder()) == flatten_parameters(fresh.decoder()));
}

TEST_CASE("train_sve: deterministic per seed and learns at mini scale") {
  const Dataset& data = test::shared_mini_data();
  const SveModel a = train_sve(data, mini_architecture(), mini_hyper(8));
  const SveModel b = train_sve(data, mini_architecture(), mini_hyper(8));
  CHECK(flatten_parameters(a.encoder()) == flatten_parameters(b.encoder()));
  CHECK(flatten_parameters(a.decoder()) == flatten_parameters(b.decoder()));

  const SveModel& model = test::shared_mini_model();
  const auto& rec = model.training();
  REQUIRE(!rec.val_loss.empty());
  CHECK(rec.final_val.total < 0.8 * rec.val_loss.front());
  // reconstruction beats the raw field spread
  const auto [train_idx, val_idx] = split_indices(150, 0.1, 7);
  const ForwardRmse recon = forward_rmse(model, data, val_idx);
  CHECK(recon.s < 1.2);  // prior sigma
}

TEST_CASE("train_sve: divergence is reported with the epoch index") {
  const Dataset& data = test::shared_mini_data();
  TrainHyper hyper = mini_hyper(3);
  hyper.step_size = 1e150;
  CHECK_THROWS_WITH_AS(train_sve(data, mini_architecture(), hyper),
                       doctest::Contains("diverged at epoch"), NumericsError);
}

TEST_CASE("train_sve: KL pressure shrinks the aggregate latent mean") {
  const Dataset& data = test::shared_mini_data();
  SveArchitecture with_kl = mini_architecture();
  with_kl.kl_weight = 0.05;
  SveArchitecture no_kl = mini_architecture();
  no_kl.kl_weight = 0.0;
  const TrainHyper hyper = mini_hyper(30);
  const SveModel m_kl = train_sve(data, with_kl, hyper);
  const SveModel m_free = train_sve(data, no_kl, hyper);

  auto aggregate_mu_norm = [&](const SveModel& m) {
    double norm2 = 0.0;
    for (int r = 0; r < 40; ++r) {
      const auto& rec = data.records[static_cast<std::size_t>(r)];
      norm2 += m.encode(BathymetryField{data.geometry, rec.bathymetry}, rec.bc)
                   .mu.squaredNorm();
    }
    return std::sqrt(norm2 / 40.0);
  };
  CHECK(aggregate_mu_norm(m_kl) < aggregate_mu_norm(m_free));
}

TEST_CASE("velocity jacobian: analytic equals masked weights on affine decoder") {
  const ChannelGeometry g = mini_geometry();
  SveArchitecture arch = mini_architecture(3);
  arch.decoder_widths = {};
  const SveModel model = SveModel::initialize(g, arch, Normalization{}, 4);
  ObservationMask mask;
  mask.indices = {{0, 0}, {5, 20}, {10, 40}};
  const Eigen::VectorXd z = Eigen::VectorXd::Random(3);
  const Eigen::MatrixXd j = model.velocity_jacobian(z, BoundaryConditions{0, 0}, mask);
  REQUIRE(j.rows() == 6);
  for (int p = 0; p < 3; ++p) {
    const auto [r, c] = mask.indices[static_cast<std::size_t>(p)];
    const int row = r * g.n_along + c;
    CHECK((j.row(p) - model.decoder().heads[0].w.row(row).head(3)).cwiseAbs().maxCoeff() <
          1e-14);
    CHECK((j.row(3 + p) - model.decoder().heads[1].w.row(row).head(3)).cwiseAbs()
              .maxCoeff() < 1e-14);
  }
}

TEST_CASE("velocity jacobian: duplicated mask rows duplicate jacobian rows") {
  const SveModel& model = test::shared_mini_model();
  ObservationMask mask;
  mask.indices = {{3, 7}, {3, 7}, {6, 11}};
  const Eigen::VectorXd z = Eigen::VectorXd::Zero(model.latent_dim());
  const Eigen::MatrixXd j = model.velocity_jacobian(z, BoundaryConditions{80, 2.5}, mask);
  CHECK(j.row(0) == j.row(1));
  CHECK(j.row(0) != j.row(2));
}

TEST_CASE("bathymetry jacobian: zeroed s-head gives the zero matrix") {
  const ChannelGeometry g = mini_geometry();
  SveArchitecture arch = mini_architecture(4);
  SveModel base = SveModel::initialize(g, arch, Normalization{}, 21);
  FeedForward decoder = base.decoder();
  decoder.heads[2].w.setZero();
  decoder.heads[2].b.setZero();
  const SveModel model(g, arch, Normalization{}, base.encoder(), decoder);
  const Eigen::MatrixXd jg =
      model.bathymetry_jacobian(Eigen::VectorXd::Random(4), BoundaryConditions{0, 0});
  CHECK(jg.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("analytic jacobians agree with forward differences on the trained model") {
  const SveModel& model = test::shared_mini_model();
  const BoundaryConditions bc{85.0, 2.3};
  const ObservationMask mask = equispaced_mask(model.geometry(), 40);
  Rng rng(3);
  Eigen::VectorXd z(model.latent_dim());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();

  ObservationSet obs;
  obs.mask = mask;
  obs.bc = bc;
  obs.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mask.value_count()));
  obs.noise_std = Eigen::VectorXd::Constant(obs.values.size(), 0.05);

  const Eigen::MatrixXd j_ad = model.velocity_jacobian(z, bc, mask);
  const Eigen::MatrixXd j_fd = jacobian_fd(model, z, obs, 1e-4);
  CHECK((j_ad - j_fd).cwiseAbs().maxCoeff() <=
        1e-2 * j_ad.cwiseAbs().maxCoeff());

  // bathymetry head
  const Eigen::MatrixXd jg = model.bathymetry_jacobian(z, bc);
  Eigen::MatrixXd jg_fd(jg.rows(), jg.cols());
  const Eigen::VectorXd base = flatten(model.decode_bathymetry(z, bc));
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    Eigen::VectorXd shifted = z;
    shifted[i] += 1e-4;
    jg_fd.col(i) = (flatten(model.decode_bathymetry(shifted, bc)) - base) / 1e-4;
  }
  CHECK((jg - jg_fd).cwiseAbs().maxCoeff() <= 1e-2 * jg.cwiseAbs().maxCoeff());
}

TEST_CASE("normalization: fit and round trip") {
  const Dataset& data = test::shared_mini_data();
  const Normalization norm = fit_normalization(data, {0, 1, 2, 3, 4});
  CHECK(norm.s.std > 0.0);
  CHECK(norm.u.std > 0.0);
  for (double x : {-3.2, 0.0, 1.7, 55.0})
    CHECK(norm.s.denormalize(norm.s.normalize(x)) == doctest::Approx(x).epsilon(1e-12));
}

TEST_CASE("model io round trip preserves behavior bitwise") {
  const SveModel& model = test::shared_mini_model();
  const auto path = std::filesystem::temp_directory_path() / "bathyrom_test_model.vgm";
  save_model(model, path);
  const SveModel loaded = load_sve_model(path);
  CHECK(flatten_parameters(loaded.encoder()) == flatten_parameters(model.encoder()));
  CHECK(flatten_parameters(loaded.decoder()) == flatten_parameters(model.decoder()));
  const Eigen::VectorXd z = Eigen::VectorXd::Random(model.latent_dim());
  const BoundaryConditions bc{77.0, 2.2};
  CHECK(loaded.decode(z, bc).s == model.decode(z, bc).s);
  CHECK(loaded.training().best_epoch == model.training().best_epoch);
  CHECK(model_kind(path) == "sve");
  std::filesystem::remove(path);
}

TEST_CASE("training rejects datasets smaller than two batches") {
  const Dataset small = test::mini_dataset(20, 9);
  TrainHyper hyper = mini_hyper(1);
  hyper.batch_size = 16;
  CHECK_THROWS_AS(train_sve(small, mini_architecture(), hyper), ValidationError);
}
