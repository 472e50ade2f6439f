#include "metapot/ctmc.hpp"
#include "metapot/error.hpp"

#include "test_util.hpp"

#include <doctest.h>

using namespace metapot;

namespace {

ChainModel two_state() {
  return ChainModel::create(StateSpace::numbered(2), RateMatrix(2, {{0, 1, 2.0}, {1, 0, 3.0}}));
}

ChainModel directed_cycle() {
  return ChainModel::create(StateSpace::numbered(3), RateMatrix(3, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 0, 1.0}}));
}

double max_rate_diff(const ChainModel& a, const ChainModel& b) {
  return (DenseMatrix(a.rates().off_diagonal()) - DenseMatrix(b.rates().off_diagonal())).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("state space labels") {
  const StateSpace s({"x", "y", "z"});
  CHECK(s.index_of("y") == 1);
  CHECK_FALSE(s.find("w").has_value());
  CHECK_THROWS_AS(s.index_of("w"), Error);
  try {
    s.index_of("w");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownLabel);
    CHECK(std::string(e.what()).find("w") != std::string::npos);
  }
  CHECK_THROWS_AS(StateSpace({"x", "x"}), Error);
  CHECK_THROWS_AS(StateSpace({"x"}), Error);
}

TEST_CASE("validate_generator") {
  SUBCASE("valid two-state with explicit diagonals") {
    const RateMatrix r(2, {{0, 1, 2.0}, {1, 0, 3.0}, {0, 0, -2.0}, {1, 1, -3.0}});
    CHECK(validate_generator(r, StateSpace::numbered(2)).empty());
  }
  SUBCASE("negative off-diagonal") {
    const RateMatrix r(2, {{0, 1, -1.0}, {1, 0, 3.0}});
    const auto v = validate_generator(r, StateSpace::numbered(2));
    REQUIRE_FALSE(v.empty());
    CHECK(v.front().kind == ViolationKind::NegativeRate);
    CHECK(v.front().from == 0);
    CHECK(v.front().to == 1);
  }
  SUBCASE("reducible") {
    const RateMatrix r(3, {{0, 1, 1.0}});
    bool reducible = false;
    for (const auto& x : validate_generator(r, StateSpace::numbered(3))) reducible |= x.kind == ViolationKind::Reducible;
    CHECK(reducible);
  }
  SUBCASE("inconsistent diagonal") {
    const RateMatrix r(2, {{0, 1, 2.0}, {1, 0, 3.0}, {0, 0, -1.0}});
    bool row_sum = false;
    for (const auto& x : validate_generator(r, StateSpace::numbered(2))) row_sum |= x.kind == ViolationKind::NonzeroRowSum;
    CHECK(row_sum);
  }
  SUBCASE("create rejects invalid generators") {
    try {
      ChainModel::create(StateSpace::numbered(2), RateMatrix(2, {{0, 1, -1.0}, {1, 0, 1.0}}));
      FAIL("expected InvalidGenerator");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InvalidGenerator);
    }
  }
}

TEST_CASE("stationary measure") {
  const ChainModel c = two_state();
  CHECK(c.stationary()[0] == doctest::Approx(3.0 / 5.0).epsilon(1e-14));
  CHECK(c.stationary()[1] == doctest::Approx(2.0 / 5.0).epsilon(1e-14));
  CHECK(c.jump_measure()[0] == doctest::Approx(6.0 / 5.0).epsilon(1e-14));

  const ChainModel cyc = directed_cycle();
  for (int i = 0; i < 3; ++i) CHECK(cyc.stationary()[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

  testutil::Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const ChainModel r = testutil::random_chain(rng, 10, trial % 2 == 0);
    const Vector oracle = testutil::dense_stationary(testutil::dense_generator(r));
    CHECK((r.stationary() - oracle).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(stationarity_residual(r.generator(), r.stationary()) < 1e-12);
  }
}

TEST_CASE("jump chain") {
  const ChainModel c = two_state();
  CHECK(c.jump_probability(0, 1) == doctest::Approx(1.0));
  testutil::Rng rng(3);
  const ChainModel r = testutil::random_chain(rng, 8, false);
  const DenseMatrix p(r.jump_matrix());
  for (Eigen::Index i = 0; i < p.rows(); ++i) CHECK(p.row(i).sum() == doctest::Approx(1.0).epsilon(1e-14));
  // M = lambda mu is invariant for the jump chain
  const Vector m = r.jump_measure();
  CHECK((p.transpose() * m - m).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("adjoint and symmetric part") {
  SUBCASE("directed cycle") {
    const ChainModel cyc = directed_cycle();
    const ChainModel star = adjoint(cyc);
    CHECK(star.rate(1, 0) == doctest::Approx(1.0));
    CHECK(star.rate(2, 1) == doctest::Approx(1.0));
    CHECK(star.rate(0, 2) == doctest::Approx(1.0));
    CHECK(star.rate(0, 1) == doctest::Approx(0.0));
    const ChainModel sym = symmetric_part(cyc);
    for (StateIndex x = 0; x < 3; ++x) {
      for (StateIndex y = 0; y < 3; ++y) {
        if (x != y) CHECK(sym.rate(x, y) == doctest::Approx(0.5));
      }
    }
  }
  SUBCASE("reversible chains are self-adjoint") {
    testutil::Rng rng(5);
    const ChainModel r = testutil::random_chain(rng, 12, true);
    CHECK(max_rate_diff(adjoint(r), r) <= 1e-12);
    CHECK(max_rate_diff(symmetric_part(r), r) <= 1e-12);
  }
  SUBCASE("adjoint against dense oracle and involution") {
    testutil::Rng rng(6);
    const ChainModel r = testutil::random_chain(rng, 9, false);
    const DenseMatrix q = testutil::dense_generator(r);
    const DenseMatrix qs = testutil::dense_adjoint(q, r.stationary());
    CHECK((testutil::dense_generator(adjoint(r)) - qs).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(max_rate_diff(adjoint(adjoint(r)), r) < 1e-12);
    CHECK((adjoint(r).stationary() - r.stationary()).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("bilinear forms") {
  const ChainModel c = two_state();
  const Vector one = Vector::Ones(2);
  const Vector g = Vector::LinSpaced(2, -1.0, 4.0);
  CHECK(bilinear_form(c, one, g, FormKind::Generator) == doctest::Approx(0.0));
  CHECK(bilinear_form(c, g, one, FormKind::Generator) == doctest::Approx(0.0));
  const Vector f = Vector::Unit(2, 1);
  // brute force: (1/2) sum_{x,y} mu(x) R(x,y) (f(y)-f(x))^2 = mu(2) R(2,1)
  CHECK(bilinear_form(c, f, f, FormKind::Dirichlet) == doctest::Approx(6.0 / 5.0).epsilon(1e-14));

  testutil::Rng rng(8);
  const ChainModel r = testutil::random_chain(rng, 7, false);
  const DenseMatrix q = testutil::dense_generator(r);
  const Vector mu = r.stationary();
  const Vector a = Vector::Random(7);
  const Vector b = Vector::Random(7);
  const double brute = (a.array() * mu.array() * (q * b).array()).sum();
  CHECK(bilinear_form(r, a, b, FormKind::Generator) == doctest::Approx(brute).epsilon(1e-12));
  double dir = 0.0;
  for (Eigen::Index x = 0; x < 7; ++x) {
    for (Eigen::Index y = 0; y < 7; ++y) {
      if (x != y) dir += 0.5 * mu[x] * q(x, y) * (a[y] - a[x]) * (a[y] - a[x]);
    }
  }
  CHECK(bilinear_form(r, a, a, FormKind::Dirichlet) == doctest::Approx(dir).epsilon(1e-12));
  CHECK_THROWS_AS(bilinear_form(r, Vector::Ones(3), b, FormKind::Generator), Error);
}

TEST_CASE("set helpers") {
  CHECK(make_set({3, 1, 3, 2}) == StateSet{1, 2, 3});
  CHECK(set_union({1, 3}, {2, 3}) == StateSet{1, 2, 3});
  CHECK(set_difference({1, 2, 3}, {2}) == StateSet{1, 3});
  CHECK(complement({0, 2}, 4) == StateSet{1, 3});
  CHECK(disjoint({0, 2}, {1, 3}));
  CHECK_FALSE(disjoint({0, 2}, {2}));
  CHECK(is_subset({2}, {1, 2}));
}
