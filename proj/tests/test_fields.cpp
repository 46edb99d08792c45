#include <doctest.h>

#include "bathyrom/errors.hpp"
#include "bathyrom/mask.hpp"
#include "bathyrom/metrics.hpp"
#include "bathyrom/rng.hpp"

using namespace bathyrom;

TEST_CASE("grid_rmse basics") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Random(4, 6);
  CHECK(grid_rmse(a, a) == 0.0);
  Eigen::MatrixXd b = a.array() + 0.5;
  CHECK(grid_rmse(a, b) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_THROWS_AS(grid_rmse(a, Eigen::MatrixXd::Zero(3, 6)), ValidationError);
}

TEST_CASE("grid_rmse matches an element-by-element sum") {
  Rng rng(11);
  Eigen::MatrixXd a(5, 5), b(5, 5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      a(i, j) = rng.normal();
      b(i, j) = rng.normal();
    }
  double acc = 0.0;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) acc += (a(i, j) - b(i, j)) * (a(i, j) - b(i, j));
  CHECK(grid_rmse(a, b) == doctest::Approx(std::sqrt(acc / 25.0)).epsilon(1e-14));
}

TEST_CASE("grid_rmse properties: symmetry and shift invariance") {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd a(3, 4), b(3, 4);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 4; ++j) {
        a(i, j) = rng.normal();
        b(i, j) = rng.normal();
      }
    const double c = rng.normal();
    CHECK(grid_rmse(a, b) == doctest::Approx(grid_rmse(b, a)).epsilon(1e-14));
    CHECK(grid_rmse(a, b) >= 0.0);
    CHECK(grid_rmse((a.array() + c).matrix(), (b.array() + c).matrix()) ==
          doctest::Approx(grid_rmse(a, b)).epsilon(1e-10));
  }
}

namespace {

/// Independent exhaustive search over every stride pair, mirroring the
/// selection rule with a different loop structure.
std::tuple<int, int, long> best_stride_by_enumeration(const ChannelGeometry& g,
                                                      int n_points) {
  long best_err = -1;
  double best_aspect = 0.0;
  int best_sa = 0, best_sl = 0;
  const double grid_aspect = static_cast<double>(g.n_along) / g.n_across;
  for (int sl = 1; sl <= g.n_along; ++sl)
    for (int sa = 1; sa <= g.n_across; ++sa) {
      const int ca = (g.n_across + sa - 1) / sa;
      const int cl = (g.n_along + sl - 1) / sl;
      const long err = std::labs(static_cast<long>(ca) * cl - n_points);
      const double aspect = std::abs(static_cast<double>(cl) / ca - grid_aspect);
      const bool better =
          best_err < 0 || err < best_err ||
          (err == best_err && aspect < best_aspect) ||
          (err == best_err && aspect == best_aspect && sa < best_sa) ||
          (err == best_err && aspect == best_aspect && sa == best_sa && sl < best_sl);
      if (better) {
        best_err = err;
        best_aspect = aspect;
        best_sa = sa;
        best_sl = sl;
      }
    }
  return {best_sa, best_sl, best_err};
}

}  // namespace

TEST_CASE("equispaced_mask full and degenerate cases") {
  const ChannelGeometry g{5, 9, 16.0, 4.0};
  const ObservationMask all = equispaced_mask(g, 45);
  CHECK(all.indices.size() == 45);
  CHECK(all.indices.front() == std::pair<int, int>(0, 0));
  CHECK(all.indices.back() == std::pair<int, int>(4, 8));

  const ObservationMask one = equispaced_mask(g, 1);
  REQUIRE(one.indices.size() == 1);
  CHECK(one.indices[0] == std::pair<int, int>(2, 4));  // grid center

  CHECK_THROWS_AS(equispaced_mask(g, 0), ValidationError);
  CHECK_THROWS_AS(equispaced_mask(g, 46), ValidationError);
}

TEST_CASE("equispaced_mask matches exhaustive stride search at full scale") {
  const ChannelGeometry g{41, 501, 16.0, 4.0};
  const ObservationMask m = equispaced_mask(g, 100);
  const auto [sa, sl, err] = best_stride_by_enumeration(g, 100);
  const int ca = (g.n_across + sa - 1) / sa;
  const int cl = (g.n_along + sl - 1) / sl;
  CHECK(static_cast<long>(m.indices.size()) ==
        static_cast<long>(ca) * cl);
  CHECK(std::labs(static_cast<long>(m.indices.size()) - 100) == err);
  // count within 10% of the request
  CHECK(std::abs(static_cast<double>(m.indices.size()) - 100.0) <= 10.0);
  // strides recoverable from the produced lattice
  CHECK(m.indices[1].second - m.indices[0].second == sl);
}

TEST_CASE("equispaced_mask is deterministic and near target for desk counts") {
  const ChannelGeometry g{21, 101, 16.0, 4.0};
  for (int n : {2121, 200, 50, 20, 10}) {
    const ObservationMask a = equispaced_mask(g, n);
    const ObservationMask b = equispaced_mask(g, n);
    CHECK(a.indices == b.indices);
    CHECK(std::abs(static_cast<double>(a.indices.size()) - n) <= 0.1 * n);
    a.validate(g);
  }
}

TEST_CASE("apply_mask ordering and round trip") {
  const ChannelGeometry g{4, 5, 1.0, 1.0};
  FlowField flow;
  flow.geometry = g;
  flow.u.resize(4, 5);
  flow.v.resize(4, 5);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 5; ++j) {
      flow.u(i, j) = 10 * i + j;
      flow.v(i, j) = -(10 * i + j);
    }

  SUBCASE("full mask flattens u then v") {
    const Eigen::VectorXd values = apply_mask(flow, full_mask(g));
    REQUIRE(values.size() == 40);
    CHECK(values[0] == 0.0);
    CHECK(values[1] == 1.0);       // row-major within u
    CHECK(values[20] == 0.0);      // v block starts
    CHECK(values[21] == -1.0);
    // un-flattening reproduces the fields
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 5; ++j) {
        CHECK(values[i * 5 + j] == flow.u(i, j));
        CHECK(values[20 + i * 5 + j] == flow.v(i, j));
      }
  }

  SUBCASE("single node gives a 2-vector") {
    ObservationMask m;
    m.indices = {{2, 3}};
    const Eigen::VectorXd values = apply_mask(flow, m);
    REQUIRE(values.size() == 2);
    CHECK(values[0] == 23.0);
    CHECK(values[1] == -23.0);
  }

  SUBCASE("random mask matches per-index lookup") {
    Rng rng(5);
    ObservationMask m;
    for (int t = 0; t < 7; ++t)
      m.indices.emplace_back(static_cast<int>(rng.next_u64() % 4),
                             static_cast<int>(rng.next_u64() % 5));
    const Eigen::VectorXd values = apply_mask(flow, m);
    for (int t = 0; t < 7; ++t) {
      CHECK(values[t] == flow.u(m.indices[t].first, m.indices[t].second));
      CHECK(values[7 + t] == flow.v(m.indices[t].first, m.indices[t].second));
    }
  }

  SUBCASE("out of bounds rejected") {
    ObservationMask m;
    m.indices = {{4, 5}};
    CHECK_THROWS_AS(apply_mask(flow, m), ValidationError);
  }
}

TEST_CASE("rng determinism and fork independence") {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng base(9);
  Rng f1 = base.fork(1);
  Rng f2 = base.fork(2);
  CHECK(f1.next_u64() != f2.next_u64());
  CHECK(Rng(kZeroNoiseSeed).normal() == 0.0);
}

TEST_CASE("rng normal moments") {
  Rng rng(77);
  double sum = 0.0, sumsq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sumsq += x * x;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(sumsq / n == doctest::Approx(1.0).epsilon(0.01));
}
