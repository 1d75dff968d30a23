#include <catch2/catch.hpp>

#include <cmath>

#include "pgvi/numeric.hpp"

using namespace pgvi;

TEST_CASE("sigmoid matches long-double reference") {
  const double xs[] = {-40.0, -5.0, -1.0, 0.0, 0.3, 2.0, 20.0, 700.0, -700.0};
  for (double x : xs) {
    const long double ref = 1.0L / (1.0L + std::exp(-static_cast<long double>(x)));
    REQUIRE(sigmoid(x) == Approx(static_cast<double>(ref)).margin(1e-15));
  }
  REQUIRE(sigmoid(0.0) == 0.5);
}

TEST_CASE("log_cosh stable for large arguments") {
  REQUIRE(log_cosh(0.0) == Approx(0.0).margin(1e-15));
  REQUIRE(log_cosh(1.0) == Approx(std::log(std::cosh(1.0))).epsilon(1e-14));
  // cosh(800) overflows a double; the identity value is 800 - log 2.
  REQUIRE(log_cosh(800.0) == Approx(800.0 - std::log(2.0)).epsilon(1e-14));
  REQUIRE(log_cosh(-3.5) == Approx(log_cosh(3.5)).epsilon(1e-14));
}

TEST_CASE("log1pexp limits") {
  REQUIRE(log1pexp(0.0) == Approx(std::log(2.0)).epsilon(1e-14));
  REQUIRE(log1pexp(100.0) == Approx(100.0).epsilon(1e-13));
  REQUIRE(log1pexp(-100.0) == Approx(std::exp(-100.0)).epsilon(1e-12));
}

TEST_CASE("pg_mean values") {
  // w -> 0 limit: tanh(w/2)/(2w) -> 1/4.
  REQUIRE(pg_mean(1.0, 0.0) == Approx(0.25).margin(1e-15));
  // Zero trials.
  REQUIRE(pg_mean(0.0, 3.7) == 0.0);
  // (2, 2) -> tanh(1)/2, evaluated independently in long double.
  const long double tanh1 = std::tanh(1.0L);
  REQUIRE(pg_mean(2.0, 2.0) == Approx(static_cast<double>(tanh1 / 2.0L)).epsilon(1e-15));
  REQUIRE(pg_mean(2.0, 2.0) == Approx(0.380797).margin(1e-6));
}

TEST_CASE("pg_mean continuous at the series switch") {
  // |pg_mean(b, 1e-8) - b/4| < 1e-10 per contract.
  REQUIRE(std::abs(pg_mean(3.0, 1e-8) - 0.75) < 1e-10);
  // Series and direct formula agree around the 1e-4 threshold.
  for (double w : {5e-5, 9.9e-5, 1.01e-4, 2e-4}) {
    const long double direct =
        1.0L / (2.0L * static_cast<long double>(w)) * std::tanh(static_cast<long double>(w) / 2.0L);
    REQUIRE(pg_mean(1.0, w) == Approx(static_cast<double>(direct)).epsilon(1e-12));
  }
}

TEST_CASE("pg_mean rejects negative input") {
  REQUIRE_THROWS_AS(pg_mean(-1.0, 0.5), std::invalid_argument);
  REQUIRE_THROWS_AS(pg_mean(1.0, -0.5), std::invalid_argument);
}

TEST_CASE("log_binom basic values") {
  REQUIRE(log_binom(0.0, 0.0) == Approx(0.0).margin(1e-14));
  REQUIRE(log_binom(6.0, 2.0) == Approx(std::log(15.0)).epsilon(1e-13));
  REQUIRE(std::isinf(log_binom(2.0, 3.0)));
}
