#include <doctest.h>

#include <filesystem>

#include "bathyrom/inversion.hpp"
#include "bathyrom/metrics.hpp"
#include "bathyrom/model_io.hpp"
#include "test_support.hpp"

using namespace bathyrom;

namespace {

const PcaRomModel& shared_pca_model() {
  static const PcaRomModel model = [] {
    PcaHyper hyper;
    hyper.base = test::mini_hyper(120);
    return train_pca_rom(test::shared_mini_data(), 8, hyper);
  }();
  return model;
}

}  // namespace

TEST_CASE("fit_pca: rank-1 sample set") {
  Rng rng(4);
  Eigen::VectorXd direction(6);
  for (int i = 0; i < 6; ++i) direction[i] = rng.normal();
  direction.normalize();
  Eigen::MatrixXd samples(12, 6);
  for (int r = 0; r < 12; ++r) samples.row(r) = (rng.normal() * direction).transpose();
  const PcaBasis basis = fit_pca(samples, 3);
  CHECK(basis.explained_variance[0] > 0.0);
  CHECK(basis.explained_variance[1] < 1e-20);
  // leading component parallel to the generating vector
  CHECK(std::abs(basis.components.col(0).dot(direction)) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("fit_pca: orthogonal mean-zero rows are recovered up to sign") {
  // 10x10 fixture with known orthogonal structure, checked against a
  // dense SVD of the same matrix.
  Eigen::MatrixXd samples = Eigen::MatrixXd::Zero(10, 10);
  for (int r = 0; r < 5; ++r) {
    Eigen::VectorXd row = Eigen::VectorXd::Zero(10);
    row[2 * r] = 3.0 - 0.5 * r;
    row[2 * r + 1] = -(3.0 - 0.5 * r);
    samples.row(2 * r) = row.transpose();
    samples.row(2 * r + 1) = -row.transpose();
  }
  const PcaBasis basis = fit_pca(samples, 5);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(samples, Eigen::ComputeThinV);
  for (int c = 0; c < 5; ++c) {
    const double align = std::abs(basis.components.col(c).dot(svd.matrixV().col(c)));
    CHECK(align == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(basis.explained_variance[c] ==
          doctest::Approx(svd.singularValues()[c] * svd.singularValues()[c] / 9.0)
              .epsilon(1e-9));
  }
}

TEST_CASE("fit_pca: complete basis reconstructs exactly") {
  Rng rng(13);
  Eigen::MatrixXd samples(8, 5);
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 5; ++c) samples(r, c) = rng.normal();
  const PcaBasis basis = fit_pca(samples, 5);
  for (int r = 0; r < 8; ++r) {
    const Eigen::VectorXd x = samples.row(r).transpose() - basis.mean;
    const Eigen::VectorXd recon = basis.components * (basis.components.transpose() * x);
    CHECK((x - recon).norm() <= 1e-8);
  }
  CHECK_THROWS_AS(fit_pca(samples, 6), ValidationError);
}

TEST_CASE("fit_pca: reconstruction error never increases with k") {
  Rng rng(23);
  Eigen::MatrixXd samples(30, 12);
  for (int r = 0; r < 30; ++r)
    for (int c = 0; c < 12; ++c) samples(r, c) = rng.normal() + 0.3 * c;
  double last = 1e30;
  for (int k = 1; k <= 12; ++k) {
    const PcaBasis basis = fit_pca(samples, k);
    double err = 0.0;
    for (int r = 0; r < 30; ++r) {
      const Eigen::VectorXd x = samples.row(r).transpose() - basis.mean;
      err += (x - basis.components * (basis.components.transpose() * x)).squaredNorm();
    }
    CHECK(err <= last + 1e-9);
    last = err;
  }
}

TEST_CASE("init model: identity regressor reproduces the PCA projection") {
  PcaHyper hyper;
  hyper.base = test::mini_hyper(0);
  const Dataset& data = test::shared_mini_data();
  const PcaRomModel model = init_pca_rom(data, 8, hyper);

  const auto& rec = data.records[3];
  const BathymetryField bathy{data.geometry, rec.bathymetry};
  const Eigen::VectorXd z = model.project(bathy);
  const Rom::Decoded out = model.decode(z, rec.bc);

  const Eigen::VectorXd x = flatten(rec.bathymetry) - model.input_basis().mean;
  const Eigen::VectorXd proj = model.input_basis().mean +
                               model.input_basis().components *
                                   (model.input_basis().components.transpose() * x);
  CHECK((flatten(out.s) - proj).cwiseAbs().maxCoeff() < 1e-8);
  // velocity heads decode to their means at the identity initialization
  CHECK((flatten(out.u) - model.output_basis_u().mean).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("train_pca_rom: epochs=0 equals the initialized model") {
  PcaHyper hyper;
  hyper.base = test::mini_hyper(0);
  const Dataset& data = test::shared_mini_data();
  const PcaRomModel trained = train_pca_rom(data, 8, hyper);
  const PcaRomModel fresh = init_pca_rom(data, 8, hyper);
  const Eigen::VectorXd z = Eigen::VectorXd::Random(8);
  const BoundaryConditions bc{90.0, 2.5};
  CHECK(trained.decode(z, bc).s == fresh.decode(z, bc).s);
  CHECK(trained.decode(z, bc).u == fresh.decode(z, bc).u);
}

TEST_CASE("train_pca_rom: linear synthetic map reaches near-zero validation loss") {
  // Fields linear in a low-dimensional cause are exactly recoverable.
  const ChannelGeometry g{5, 8, 10.0, 5.0};
  Dataset data;
  data.geometry = g;
  Rng rng(31);
  Eigen::MatrixXd basis_u(40, 3), basis_s(40, 3);
  for (int i = 0; i < 40; ++i)
    for (int j = 0; j < 3; ++j) {
      basis_u(i, j) = rng.normal();
      basis_s(i, j) = rng.normal();
    }
  for (int r = 0; r < 80; ++r) {
    Eigen::Vector3d c{rng.normal(), rng.normal(), rng.normal()};
    const Eigen::VectorXd s_flat = basis_s * c;
    const Eigen::VectorXd u_flat = basis_u * c;
    BathymetryField bathy{g, unflatten(s_flat, 5, 8)};
    FlowField flow{g, unflatten(u_flat, 5, 8), unflatten(0.5 * u_flat, 5, 8),
                   Eigen::MatrixXd::Ones(5, 8), Eigen::VectorXd::Zero(8)};
    data.add_record(bathy, BoundaryConditions{100.0, 2.0}, flow);
  }
  PcaHyper hyper;
  hyper.base = test::mini_hyper(400);
  hyper.base.batch_size = 16;
  hyper.base.step_size = 3e-3;
  hyper.base.final_step_factor = 1.0;
  const PcaRomModel model = train_pca_rom(data, 3, hyper);
  CHECK(model.training().final_val.total < 1e-3);
}

TEST_CASE("pca jacobians: affine regressor is constant in z, FD agreement") {
  PcaHyper hyper;
  hyper.base = test::mini_hyper(0);
  hyper.regressor_widths = {};  // affine regressor
  const Dataset& data = test::shared_mini_data();
  const PcaRomModel model = init_pca_rom(data, 8, hyper);
  const BoundaryConditions bc{85.0, 2.4};
  const ObservationMask mask = equispaced_mask(data.geometry, 30);

  const Eigen::MatrixXd j0 =
      model.velocity_jacobian(Eigen::VectorXd::Zero(8), bc, mask);
  const Eigen::MatrixXd j1 =
      model.velocity_jacobian(Eigen::VectorXd::Random(8), bc, mask);
  CHECK((j0 - j1).cwiseAbs().maxCoeff() < 1e-12);

  // trained (nonlinear) model against forward differences
  const PcaRomModel& trained = shared_pca_model();
  Rng rng(6);
  Eigen::VectorXd z(8);
  for (int i = 0; i < 8; ++i) z[i] = rng.normal();
  ObservationSet obs;
  obs.mask = mask;
  obs.bc = bc;
  obs.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mask.value_count()));
  obs.noise_std = Eigen::VectorXd::Constant(obs.values.size(), 0.05);
  const Eigen::MatrixXd j_ad = trained.velocity_jacobian(z, bc, mask);
  const Eigen::MatrixXd j_fd = jacobian_fd(trained, z, obs, 1e-4);
  CHECK((j_ad - j_fd).cwiseAbs().maxCoeff() <= 1e-2 * j_ad.cwiseAbs().maxCoeff());

  const Eigen::MatrixXd jg = trained.bathymetry_jacobian(z, bc);
  const Eigen::VectorXd base = flatten(trained.decode_bathymetry(z, bc));
  Eigen::MatrixXd jg_fd(jg.rows(), jg.cols());
  for (int i = 0; i < 8; ++i) {
    Eigen::VectorXd shifted = z;
    shifted[i] += 1e-4;
    jg_fd.col(i) = (flatten(trained.decode_bathymetry(shifted, bc)) - base) / 1e-4;
  }
  CHECK((jg - jg_fd).cwiseAbs().maxCoeff() <= 1e-2 * jg.cwiseAbs().maxCoeff());
}

TEST_CASE("pca model io round trip") {
  const PcaRomModel& model = shared_pca_model();
  const auto path = std::filesystem::temp_directory_path() / "bathyrom_test_pca.vgm";
  save_model(model, path);
  const PcaRomModel loaded = load_pca_model(path);
  const Eigen::VectorXd z = Eigen::VectorXd::Random(8);
  const BoundaryConditions bc{95.0, 2.1};
  CHECK(loaded.decode(z, bc).s == model.decode(z, bc).s);
  CHECK(loaded.decode(z, bc).u == model.decode(z, bc).u);
  CHECK(model_kind(path) == "pca");
  CHECK(loaded.training().val_recon_u == model.training().val_recon_u);
  std::filesystem::remove(path);
}

TEST_CASE("pca training learns the mini problem") {
  const PcaRomModel& model = shared_pca_model();
  const auto& rec = model.training();
  CHECK(rec.final_val.total < rec.val_loss.front());
  CHECK(rec.val_recon_u > 0.0);
  const Dataset& data = test::shared_mini_data();
  const auto [train_idx, val_idx] =
      split_indices(static_cast<int>(data.records.size()), 0.1, 7);
  double s_err = 0.0;
  for (int r : val_idx) {
    const auto& record = data.records[static_cast<std::size_t>(r)];
    const Rom::Decoded d = model.decode(
        model.project(BathymetryField{data.geometry, record.bathymetry}), record.bc);
    s_err += grid_rmse(d.s, record.bathymetry);
  }
  CHECK(s_err / static_cast<double>(val_idx.size()) < 1.2);
}
