#include <doctest.h>

#include <cmath>

#include "dimerlab/coherent.hpp"
#include "dimerlab/state.hpp"

using namespace dimerlab;

TEST_CASE("coherent states are normalized across scales and near the poles") {
  for (int n : {1, 10, 1000, 100000}) {
    for (double p : {0.0, 0.5, -0.97, 0.999999, -1.0, 1.0}) {
      ManyBodyState st = coherent_state(n, {p, 0.7});
      CAPTURE(n);
      CAPTURE(p);
      CHECK(std::abs(st.norm() - 1.0) <= 1e-12);
      CHECK(st.time == 0.0);
    }
  }
}

TEST_CASE("pole states are Fock states") {
  //  p = +1 puts every particle on site 1 (j = N); p = -1 on site 2 (j = 0).
  ManyBodyState top = coherent_state(12, {1.0, 0.3});
  CHECK(std::abs(top.amps[12]) == doctest::Approx(1.0).epsilon(1e-13));
  ManyBodyState bottom = coherent_state(12, {-1.0, 0.3});
  CHECK(std::abs(bottom.amps[0]) == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("fock_state basics") {
  ManyBodyState f = fock_state(9, 4);
  REQUIRE(f.dim() == 10);
  CHECK(std::abs(f.amps[4]) == doctest::Approx(1.0));
  CHECK(f.norm() == doctest::Approx(1.0));
  CHECK_THROWS_AS(fock_state(3, 7), StructuralError);
  CHECK_THROWS_AS(fock_state(3, -1), StructuralError);
}

TEST_CASE("husimi value at the state's own center is one") {
  for (int n : {5, 200, 100000}) {
    PhasePoint x{0.31, -1.2};
    ManyBodyState st = coherent_state(n, x);
    CHECK(husimi_value(st, x) == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("husimi grid matches pointwise evaluation and localizes the state") {
  const PhasePoint center{0.3, 1.0};
  ManyBodyState st = coherent_state(100, center);
  HusimiGrid grid = husimi_grid(st, 101, 101);
  REQUIRE(grid.p_axis.size() == 101);
  REQUIRE(grid.phi_axis.size() == 101);
  REQUIRE(grid.q.rows() == 101);
  REQUIRE(grid.q.cols() == 101);

  CHECK(grid.p_axis[0] == doctest::Approx(-1.0));
  CHECK(grid.p_axis[100] == doctest::Approx(1.0));
  CHECK(grid.phi_axis[100] == doctest::Approx(M_PI));
  for (int i = 1; i < 101; ++i) {
    CHECK(grid.p_axis[i] > grid.p_axis[i - 1]);
    CHECK(grid.phi_axis[i] > grid.phi_axis[i - 1]);
  }

  // Row/column sweep agrees with direct evaluation.
  for (int i : {0, 7, 50, 93}) {
    for (int j : {0, 13, 50, 99}) {
      const double direct = husimi_value(st, {grid.p_axis[i], grid.phi_axis[j]});
      CHECK(grid.q(i, j) == doctest::Approx(direct).epsilon(1e-10));
    }
  }

  // Bounded and peaked at the packet center.
  CHECK(grid.q.minCoeff() >= 0.0);
  CHECK(grid.q.maxCoeff() <= 1.0 + 1e-12);
  Eigen::Index imax, jmax;
  grid.q.maxCoeff(&imax, &jmax);
  CHECK(std::abs(grid.p_axis[imax] - center.p) <= 0.02 + 1e-12);
  CHECK(std::abs(grid.phi_axis[jmax] - center.phi) <= 2.0 * M_PI / 100 + 1e-12);
}

TEST_CASE("husimi of an unnormalized state is rejected") {
  ManyBodyState st = coherent_state(10, {0.0, 0.0});
  st.amps *= 2.0;
  CHECK_THROWS_AS(husimi_value(st, {0.0, 0.0}), StructuralError);
}
