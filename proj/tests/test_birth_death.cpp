#include "metapot/birth_death.hpp"
#include "metapot/error.hpp"
#include "metapot/potential.hpp"
#include "metapot/trace_collapse.hpp"

#include "test_util.hpp"

#include <boost/math/special_functions/zeta.hpp>
#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace metapot;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidArgument;
}

bd::Config symmetric(double phi = 1.0) {
  return bd::piecewise_power_config(0.0, 1.0, {{0.25, 2.0, 0.25}, {0.75, 2.0, 0.25}}, bd::constant_function(phi));
}

}  // namespace

TEST_CASE("state space construction") {
  SUBCASE("single interior well, N = 4") {
    bd::Config c;
    c.a = 0.0;
    c.b = 1.0;
    c.wells = {{0.5, 2.0, 0.5}};
    const bd::Grid g = bd::build_state_space(c, 4);
    REQUIRE(g.points.size() == 5);
    for (int i = 0; i < 5; ++i) CHECK(g.points[static_cast<std::size_t>(i)] == doctest::Approx(0.25 * i));
    CHECK(g.index_of_well(0) == 2);
  }
  SUBCASE("two wells, N = 8 gives the full mesh") {
    const bd::Grid g = bd::build_state_space(symmetric(), 8);
    REQUIRE(g.points.size() == 9);
    for (int i = 0; i < 9; ++i) CHECK(g.points[static_cast<std::size_t>(i)] == doctest::Approx(i / 8.0));
    CHECK(g.index_of_well(0) == 2);
    CHECK(g.index_of_well(1) == 6);
  }
  SUBCASE("odd gap leaves the seam unmatched") {
    // gap 0.5 * 5 = 2.5 steps: two points from each side, the middle skipped
    const auto c = bd::piecewise_power_config(0.0, 1.0, {{0.25, 2.0, 0.2}, {0.75, 2.0, 0.2}}, bd::constant_function(1.0));
    const bd::Grid g = bd::build_state_space(c, 5);
    for (std::size_t i = 1; i < g.points.size(); ++i) CHECK(g.points[i] > g.points[i - 1]);
    CHECK(g.points.front() == doctest::Approx(0.05));
    CHECK(g.points.back() == doctest::Approx(0.95));
  }
  SUBCASE("wells at both endpoints") {
    const auto c = bd::piecewise_power_config(0.0, 1.0, {{0.0, 2.0, 0.3}, {1.0, 2.0, 0.3}}, bd::constant_function(1.0));
    const bd::Grid g = bd::build_state_space(c, 10);
    CHECK(g.points.front() == 0.0);
    CHECK(g.points.back() == doctest::Approx(1.0));
    CHECK(g.well.front() == 0);
    CHECK(g.well.back() == 1);
    CHECK(g.points.size() == 11);
  }
  SUBCASE("errors") {
    bd::Config bad = symmetric();
    bad.a = 1.0;
    CHECK(code_of([&] { bd::build_state_space(bad, 10); }) == ErrorCode::DegenerateInterval);
    CHECK(code_of([&] { bd::build_state_space(symmetric(), 0); }) == ErrorCode::DegenerateInterval);
    bd::Config swapped = symmetric();
    std::swap(swapped.wells[0], swapped.wells[1]);
    CHECK(code_of([&] { bd::validate_config(swapped, 10); }) == ErrorCode::OutOfOrder);
    CHECK(code_of([&] { bd::validate_config(bad, 10); }) == ErrorCode::DegenerateInterval);
  }
}

TEST_CASE("config validation") {
  CHECK_NOTHROW(bd::validate_config(symmetric(), 100));
  bd::Config shallow = symmetric();
  shallow.wells[1].exponent = 1.5;
  shallow.h = bd::piecewise_power(shallow.wells);
  CHECK(code_of([&] { bd::validate_config(shallow, 100); }) == ErrorCode::InvalidArgument);  // one deep well
  bd::Config wrong_h = symmetric();
  wrong_h.h = bd::polynomial_function({0.1, 0.0, 1.0});
  CHECK(code_of([&] { bd::validate_config(wrong_h, 100); }) == ErrorCode::InvalidArgument);
  bd::Config zero_phi = symmetric();
  zero_phi.phi = bd::polynomial_function({0.0, 1.0});
  CHECK(code_of([&] { bd::validate_config(zero_phi, 100); }) == ErrorCode::InvalidArgument);
  CHECK(bd::deep_exponent(symmetric()) == 2.0);
  CHECK(bd::deep_wells(symmetric()) == std::vector<std::size_t>{0, 1});
  CHECK(bd::window_width(symmetric(), 4000) == 63);
}

TEST_CASE("measure and rates") {
  const bd::Chain c = bd::build_chain(symmetric(), 40);
  const Vector& nu = c.measure.nu;
  CHECK(nu.sum() == doctest::Approx(1.0));
  const StateIndex w = c.grid.index_of_well(0);
  CHECK(nu[static_cast<Eigen::Index>(w)] * c.measure.z == doctest::Approx(1600.0));
  const StateIndex off = w + 3;
  CHECK(nu[static_cast<Eigen::Index>(off)] * c.measure.z == doctest::Approx(1.0 / std::pow(3.0 / 40.0, 2.0)));
  for (StateIndex x = 1; x < c.chain.size(); ++x) CHECK(c.chain.rate(x, x - 1) == doctest::Approx(1.0));
  // reversible with respect to nu
  for (StateIndex x = 0; x + 1 < c.chain.size(); ++x) {
    CHECK(nu[static_cast<Eigen::Index>(x)] * c.chain.rate(x, x + 1) ==
          doctest::Approx(nu[static_cast<Eigen::Index>(x + 1)] * c.chain.rate(x + 1, x)));
  }
  CHECK(c.chain.space().label(w) == "0.25");
}

TEST_CASE("zeta and normalizer") {
  for (double s : {1.1, 1.5, 2.0, 3.0, 4.5, 10.0}) {
    CHECK(bd::zeta(s) == doctest::Approx(boost::math::zeta(s)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(bd::zeta(1.0), Error);
  const double m = 1.0 + std::numbers::pi * std::numbers::pi / 3.0;
  CHECK(bd::well_mass(symmetric(), 0) == doctest::Approx(m).epsilon(1e-13));
  CHECK(bd::normalizer_limit(symmetric()) == doctest::Approx(2.0 * m).epsilon(1e-13));
  const auto edge = bd::piecewise_power_config(0.0, 1.0, {{0.0, 2.0, 0.3}, {0.6, 2.0, 0.3}}, bd::constant_function(1.0));
  CHECK(bd::well_mass(edge, 0) == doctest::Approx(1.0 + boost::math::zeta(2.0)).epsilon(1e-13));
  CHECK(bd::well_mass(edge, 1) == doctest::Approx(m).epsilon(1e-13));

  double prev = 1e300;
  for (int n : {250, 500, 1000, 2000, 4000}) {
    const bd::Chain c = bd::build_chain(symmetric(), n);
    const double err = std::abs(c.measure.z / (double(n) * n) - 2.0 * m) / (2.0 * m);
    CHECK(err < prev);
    prev = err;
  }
  CHECK(prev <= 0.02);
}

TEST_CASE("one-dimensional capacities") {
  const bd::Chain c = bd::build_chain(symmetric(), 60);
  CHECK(bd::capacity_1d(c, 4, 5) ==
        doctest::Approx(c.chain.stationary()[4] * c.chain.rate(4, 5)).epsilon(1e-14));
  for (auto [x, y] : {std::pair<StateIndex, StateIndex>{3, 20}, {0, 60}, {15, 45}}) {
    CHECK(testutil::rel(bd::capacity_1d(c, x, y), capacity_value(c.chain, {x}, {y})) < 1e-9);
  }
  CHECK(code_of([&] { bd::capacity_1d(c, 5, 5); }) == ErrorCode::OutOfOrder);
  CHECK(code_of([&] { bd::capacity_1d(c, 6, 2); }) == ErrorCode::OutOfOrder);
}

TEST_CASE("asymptotic rates") {
  const double m = 1.0 + std::numbers::pi * std::numbers::pi / 3.0;
  CHECK(bd::integral_h_over_phi(symmetric(), 0.25, 0.75) == doctest::Approx(1.0 / 96.0).epsilon(1e-13));
  const auto r = bd::asymptotic_rates(symmetric());
  REQUIRE(r.size() == 2);
  CHECK(r[0].value == doctest::Approx(96.0 / m).epsilon(1e-12));
  CHECK(r[1].value == doctest::Approx(96.0 / m).epsilon(1e-12));
  CHECK(r[0].value == doctest::Approx(22.3785).epsilon(1e-5));
  const auto fast = bd::asymptotic_rates(symmetric(3.0));
  CHECK(fast[0].value == doctest::Approx(3.0 * r[0].value).epsilon(1e-12));
}

TEST_CASE("metastates") {
  const bd::Chain c = bd::build_chain(symmetric(), 100);
  const Partition p = bd::metastates(symmetric(), c, 10);
  REQUIRE(p.size() == 2);
  CHECK(p.metastates[0].size() == 21);
  CHECK(p.metapoints[0] == c.grid.index_of_well(0));
  CHECK(code_of([&] { bd::metastates(symmetric(), c, 25); }) == ErrorCode::WindowTooWide);
}

TEST_CASE("finite N against the limit") {
  const bd::ConvergenceTable t = bd::finite_n_vs_limit(symmetric(), {100, 200, 400});
  REQUIRE(t.rows.size() == 3);
  for (const auto& row : t.rows) {
    CHECK(row.route_discrepancy <= 1e-9);
    CHECK(row.scaled_rates[0] == doctest::Approx(row.scaled_rates[1]).epsilon(1e-9));
  }
  CHECK(t.rows[2].relative_error[0] < t.rows[1].relative_error[0]);
  CHECK(t.rows[1].relative_error[0] < t.rows[0].relative_error[0]);
  CHECK(t.rows[2].h1[0] < t.rows[0].h1[0]);
  // metastate mass -> m(b_i) / sum m(b_j) = 1/2, and nu(b_i) -> 1 / sum m(b_j)
  const bd::Chain c = bd::build_chain(symmetric(), 400);
  const Partition p = bd::metastates(symmetric(), c, bd::window_width(symmetric(), 400));
  CHECK(c.chain.mass(p.metastates[0]) == doctest::Approx(c.chain.mass(p.metastates[1])).epsilon(1e-12));
  CHECK(c.chain.mass(p.metastates[0]) == doctest::Approx(0.5).epsilon(0.05));
  CHECK(c.chain.stationary()[static_cast<Eigen::Index>(p.metapoints[0])] ==
        doctest::Approx(1.0 / bd::normalizer_limit(symmetric())).epsilon(0.05));
  const std::string csv = bd::convergence_csv(t);
  CHECK(csv.rfind("n,ell,z_ratio,z_limit,scaled_rate_1_2,", 0) == 0);
}

TEST_CASE("birth-death family as a tunneling family") {
  const ChainFamily fam = bd::family(symmetric(), {200, 400, 800});
  CHECK(fam.time_scale(10) == doctest::Approx(1000.0));
  const FamilyMember m = fam.build(200);
  CHECK(m.partition.size() == 2);
  const SequenceCheck h1 = check_h1(fam, 0);
  CHECK(h1.decreasing);
  const SequenceCheck h2 = check_h2(fam, 0);
  CHECK(h2.decreasing);
}
