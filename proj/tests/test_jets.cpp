#include <doctest.h>

#include <random>

#include "sphertrunc/errors.hpp"
#include "sphertrunc/gamma_tables.hpp"
#include "sphertrunc/jets.hpp"

using namespace sphertrunc;

TEST_CASE("jet arithmetic round trips") {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> a(6), b(6);
    for (auto& x : a) x = u(gen);
    for (auto& x : b) x = u(gen);
    b[0] = 0.5 + std::abs(b[0]);
    const auto ja = Jet<double>::from_coefficients(a);
    const auto jb = Jet<double>::from_coefficients(b);
    const auto q = (ja * jb) / jb;
    for (int i = 0; i < 6; ++i) CHECK(q[i] == doctest::Approx(a[static_cast<std::size_t>(i)]).epsilon(1e-10));
    const auto s = (ja + jb) - jb;
    for (int i = 0; i < 6; ++i) CHECK(s[i] == doctest::Approx(a[static_cast<std::size_t>(i)]).epsilon(1e-12));
  }
  const auto z = Jet<double>::from_coefficients({0.0, 1.0});
  CHECK_THROWS_AS(Jet<double>::from_coefficients({1.0, 2.0}) / z, NumericError);
}

TEST_CASE("ratio polynomials") {
  const RatioPoly r1 = RatioPoly::ratio(1), r2 = RatioPoly::ratio(2);
  const RatioPoly p = (r1 + r2) * (r1 - r2);
  CHECK(p.coefficient(ChiSquareRatioKey::from_offsets({2, 2})) == 1.0);
  CHECK(p.coefficient(ChiSquareRatioKey::from_offsets({4, 4})) == -1.0);
  CHECK(p.coefficient(ChiSquareRatioKey::from_offsets({4, 2})) == 0.0);
  CHECK(RatioPoly(3.0).is_constant());
  std::vector<double> ratios{1.0, 0.5, 0.2};
  CHECK(p.evaluate(ratios) == doctest::Approx(0.25 - 0.04));
  CHECK_THROWS_AS(Jet<RatioPoly>::from_coefficients({r1, r2}) / Jet<RatioPoly>::from_coefficients({r1, r2}),
                  ContractError);
}

TEST_CASE("structure basis sizes") {
  CHECK(structure_basis(2, false).size() == 4);
  CHECK(structure_basis(3, true).size() == 6);
  CHECK(structure_basis(3, false).size() == 12);
  CHECK(structure_basis(4, true).size() == 18);
  CHECK(structure_basis(4, false).size() == 32);
}

TEST_CASE("rationalize") {
  CHECK(rationalize(-0.375).value() == Rational(-3, 8));
  CHECK(rationalize(1.0 / 384.0, 4096).value() == Rational(1, 384));
  CHECK_FALSE(rationalize(1.0 / 384.0).has_value());
  CHECK_FALSE(rationalize(0.123456789).has_value());
}

TEST_CASE("extraction reproduces the embedded tables") {
  for (const auto& t : embedded_gamma_tables()) {
    const auto x = extract_table(t.order, t.zeta1_zero, 42);
    CAPTURE(t.order);
    REQUIRE(x.ok);
    const auto d = diff_tables(t, x.table());
    CHECK(d.identical);
    CHECK(x.constant_term < 1e-10);
    CHECK(x.max_key_degree == 2 * t.order + 2);
  }
}

TEST_CASE("general bases extract with zero row sums") {
  const auto x3 = extract_table(3, false, 7);
  REQUIRE(x3.ok);
  CHECK(x3.rows.size() == 12);
  CHECK(x3.table().rows_sum_to_zero());
  const auto x4 = extract_table(4, false, 7, 0, 4096);
  REQUIRE(x4.ok);
  CHECK(x4.rows.size() == 32);
  CHECK(x4.table().rows_sum_to_zero());
  // the reduced basis is the general one restricted to zeta_1-free rows
  const auto& t3 = gamma_table(3);
  const auto g3 = x3.table();
  for (const auto& row : t3.rows)
    for (const auto& col : t3.columns) CHECK(g3.at(row, col) == t3.at(row, col));
}
