#include <doctest.h>

#include <cmath>
#include <vector>

#include "dimerlab/meanfield.hpp"

using namespace dimerlab;

namespace {

double dist(const PhasePoint& a, const PhasePoint& b) {
  return std::hypot(a.p - b.p, wrap_angle(a.phi) - wrap_angle(b.phi));
}

}  // namespace

TEST_CASE("equations of motion at a frozen point") {
  MeanFieldParams mf;  // alpha 0.92, mu/Omega 0.4, omega/Omega 1.9
  const double p = 0.3, phi = 0.7, tau = 0.45;
  double dp, dphi;
  meanfield_rhs(mf, {p, phi}, tau, dp, dphi);
  const double root = std::sqrt(1.0 - p * p);
  CHECK(dp == doctest::Approx(-root * std::sin(phi)).epsilon(1e-14));
  CHECK(dphi == doctest::Approx(2.0 * mf.alpha * p + p * std::cos(phi) / root +
                                2.0 * mf.drive_ratio * std::cos(mf.freq_ratio * tau))
                    .epsilon(1e-14));
  CHECK(meanfield_energy(mf, {p, phi}, tau) ==
        doctest::Approx(mf.alpha * p * p - root * std::cos(phi) +
                        2.0 * mf.drive_ratio * p * std::cos(mf.freq_ratio * tau))
            .epsilon(1e-14));
}

TEST_CASE("drive phase: tau = 0 sits at the drive maximum") {
  MeanFieldParams mf;
  double dp0, dphi0, dp4, dphi4;
  meanfield_rhs(mf, {0.0, 0.0}, 0.0, dp0, dphi0);
  CHECK(dphi0 == doctest::Approx(2.0 * mf.drive_ratio).epsilon(1e-14));
  meanfield_rhs(mf, {0.0, 0.0}, 0.25 * mf.dtau(), dp4, dphi4);
  CHECK(std::abs(dphi4) <= 1e-12);  // quarter period later the drive crosses zero
}

TEST_CASE("undriven energy is conserved over one hundred periods") {
  MeanFieldParams mf;
  mf.drive_ratio = 0.0;
  const PhasePoint x0{0.3, 1.0};
  const double e0 = meanfield_energy(mf, x0, 0.0);
  PhasePoint x = flow(mf, x0, 0.0, 100.0 * mf.dtau());
  CHECK(std::abs(meanfield_energy(mf, x, 0.0) - e0) <= 1e-8);
}

TEST_CASE("the drive injects energy") {
  MeanFieldParams mf;
  const PhasePoint x0{0.3, 1.0};
  PhasePoint x = flow(mf, x0, 0.0, 3.0 * mf.dtau());
  CHECK(std::abs(meanfield_energy(mf, x, 0.0) - meanfield_energy(mf, x0, 0.0)) > 1e-4);
}

TEST_CASE("flow is reversible") {
  MeanFieldParams mf;
  const PhasePoint x0{-0.2, 0.9};
  PhasePoint fwd = flow(mf, x0, 0.0, 5.7);
  PhasePoint back = flow(mf, fwd, 5.7, 0.0);
  CHECK(dist(back, x0) <= 1e-9);
}

TEST_CASE("poincare_map composes") {
  MeanFieldParams mf;
  const PhasePoint x0{0.2, -0.5};
  PhasePoint three = poincare_map(mf, x0, 3);
  PhasePoint step = x0;
  for (int i = 0; i < 3; ++i) step = poincare_map(mf, step, 1);
  CHECK(dist(three, step) <= 1e-9);
}

TEST_CASE("the section map preserves loop area in a regular region") {
  MeanFieldParams mf;
  const PhasePoint c{0.45, 0.0};  // inside the main island
  const int m = 256;
  const double r = 0.05;
  std::vector<PhasePoint> ring(m), image(m);
  for (int i = 0; i < m; ++i) {
    const double a = 2.0 * M_PI * i / m;
    ring[i] = {c.p + r * std::cos(a), c.phi + r * std::sin(a)};
    image[i] = poincare_map(mf, ring[i], 10);
  }
  const double area0 = std::abs(polyline_loop_integral(ring));
  const double area1 = std::abs(polyline_loop_integral(image));
  CHECK(area0 == doctest::Approx(M_PI * r * r).epsilon(2e-4));
  CHECK(area1 == doctest::Approx(area0).epsilon(1e-3));
}

TEST_CASE("pole guard trips instead of integrating through the chart singularity") {
  MeanFieldParams mf;
  double dp, dphi;
  CHECK_THROWS_AS(meanfield_rhs(mf, {1.0, 0.0}, 0.0, dp, dphi), PoleProximity);
  CHECK_THROWS_AS(meanfield_rhs(mf, {-1.0 + 1e-13, 0.0}, 0.0, dp, dphi), PoleProximity);
}

TEST_CASE("wrap_angle reduces to (-pi, pi]") {
  CHECK(wrap_angle(0.1) == doctest::Approx(0.1));
  CHECK(wrap_angle(M_PI) == doctest::Approx(M_PI));
  CHECK(wrap_angle(-M_PI) == doctest::Approx(M_PI));
  CHECK(wrap_angle(3.0 * M_PI) == doctest::Approx(M_PI));
  CHECK(wrap_angle(-0.5 - 8.0 * M_PI) == doctest::Approx(-0.5));
}

TEST_CASE("parameter reduction and validation") {
  DimerParams p;
  p.n = 500;
  p.kappa = 0.92 / 500.0;
  MeanFieldParams mf = MeanFieldParams::reduce(p);
  CHECK(mf.alpha == doctest::Approx(0.92).epsilon(1e-12));
  CHECK(mf.drive_ratio == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(mf.freq_ratio == doctest::Approx(1.9).epsilon(1e-15));
  CHECK(mf.dtau() == doctest::Approx(2.0 * M_PI / 1.9).epsilon(1e-15));

  MeanFieldParams bad = mf;
  bad.freq_ratio = 0.0;
  CHECK_THROWS_AS(bad.validate(), StructuralError);
  bad = mf;
  bad.drive_ratio = -0.1;
  CHECK_THROWS_AS(bad.validate(), StructuralError);
}

TEST_CASE("main elliptic center sits on the positive-p axis") {
  MeanFieldParams mf;
  PeriodicOrbit orb = find_periodic_orbit(mf, {0.0, 0.0}, 1);
  REQUIRE(orb.converged);
  CHECK(orb.residual <= 1e-9);
  CHECK(orb.elliptic);
  CHECK(orb.point.p == doctest::Approx(0.499372).epsilon(4e-4));
  CHECK(std::abs(orb.point.phi) <= 1e-6);
  CHECK(orb.stability_angle == doctest::Approx(1.793658).epsilon(2e-3));
  CHECK(orb.residue > 0.0);
}

TEST_CASE("period-3 chain refines from the published seed") {
  MeanFieldParams mf;
  PeriodicOrbit orb = find_periodic_orbit(mf, {-0.497, 0.0}, 3);
  REQUIRE(orb.converged);
  CHECK(orb.elliptic);
  CHECK(orb.point.p == doctest::Approx(-0.497659).epsilon(1e-3));
  CHECK(std::abs(orb.point.phi) <= 1e-5);
  CHECK(orb.stability_angle == doctest::Approx(1.179122).epsilon(2e-3));

  // Iterates visit the two partner islands.
  PhasePoint x1 = poincare_map(mf, orb.point, 1);
  PhasePoint x2 = poincare_map(mf, x1, 1);
  CHECK(x1.p == doctest::Approx(0.267102).epsilon(2e-3));
  CHECK(std::abs(wrap_angle(x1.phi)) == doctest::Approx(1.695029).epsilon(2e-3));
  CHECK(x2.p == doctest::Approx(0.267102).epsilon(2e-3));
  CHECK(std::abs(wrap_angle(x2.phi)) == doctest::Approx(1.695029).epsilon(2e-3));

  // Published seed nearly closes after three periods; the gap reflects the
  // three-decimal rounding of the seed, not integrator error.
  PhasePoint r3 = poincare_map(mf, {-0.497, 0.0}, 3);
  CHECK(dist(r3, {-0.497, 0.0}) <= 2e-3);
}

TEST_CASE("the partner period-3 chain is half a period downstream") {
  MeanFieldParams mf;
  PeriodicOrbit first = find_periodic_orbit(mf, {-0.497, 0.0}, 3);
  REQUIRE(first.converged);
  // Flowing backward half a period and reflecting lands on the second chain.
  PhasePoint back = flow(mf, first.point, 0.0, -0.5 * mf.dtau());
  PhasePoint seed{-back.p, wrap_angle(-back.phi)};
  PeriodicOrbit second = find_periodic_orbit(mf, seed, 3);
  REQUIRE(second.converged);
  CHECK(second.elliptic);
  CHECK(second.point.p == doctest::Approx(-0.332381).epsilon(3e-3));
  CHECK(wrap_angle(second.point.phi) == doctest::Approx(-1.023347).epsilon(3e-3));
  CHECK(second.stability_angle == doctest::Approx(first.stability_angle).epsilon(1e-3));
  // Genuinely distinct from the first chain's iterates.
  PhasePoint its[3] = {first.point, poincare_map(mf, first.point, 1),
                       poincare_map(mf, first.point, 2)};
  for (const auto& it : its) CHECK(dist(second.point, it) > 1e-3);
}

TEST_CASE("third-order fixed point has minimal period eighteen") {
  MeanFieldParams mf;
  PeriodicOrbit orb = find_periodic_orbit(mf, {-0.4278, 0.0}, 18);
  REQUIRE(orb.converged);
  CHECK(orb.elliptic);
  CHECK(orb.point.p == doctest::Approx(-0.427908).epsilon(1e-3));
  CHECK(orb.stability_angle == doctest::Approx(0.774569).epsilon(3e-3));
  CHECK(tube_period(mf, orb.point, 24) == 18);
}

TEST_CASE("poincare_section traces every seed deterministically") {
  MeanFieldParams mf;
  std::vector<PhasePoint> seeds = {{0.45, 0.0}, {-0.497, 0.0}, {0.1, 2.0}};
  auto traces = poincare_section(mf, seeds, 40);
  REQUIRE(traces.size() == 3);
  for (const auto& tr : traces) {
    CHECK_FALSE(tr.aborted);
    CHECK(tr.points.size() == 40);
    for (const auto& pt : tr.points) {
      CHECK(std::abs(pt.p) <= 1.0);
      CHECK(pt.phi <= M_PI + 1e-12);
      CHECK(pt.phi > -M_PI - 1e-12);
    }
  }
  auto again = poincare_section(mf, seeds, 40);
  for (size_t i = 0; i < traces.size(); ++i)
    for (size_t j = 0; j < traces[i].points.size(); ++j)
      CHECK(dist(traces[i].points[j], again[i].points[j]) == 0.0);
}

TEST_CASE("invariant curve tracing orders a regular orbit and rejects chaos") {
  MeanFieldParams mf;
  PeriodicOrbit center = find_periodic_orbit(mf, {0.0, 0.0}, 1);
  InvariantCurve curve = trace_invariant_curve(mf, {center.point.p + 0.08, 0.0}, 1,
                                               TraceOptions{}, &center.point);
  CHECK(curve.section_points.size() >= 256);
  CHECK(curve.enclosed_action > 0.0);
  CHECK(curve.period_multiplicity == 1);
  // Ordered by polar angle about the center: strictly monotone after closing.
  double prev = -std::numeric_limits<double>::infinity();
  for (const auto& pt : curve.section_points) {
    const double ang = std::atan2(pt.p - center.point.p, pt.phi - center.point.phi);
    CHECK(ang >= prev);
    prev = ang;
  }
  CHECK_THROWS_AS(trace_invariant_curve(mf, {0.95, 2.4}, 1), NotInvariantCurve);
}
