#include <catch2/catch.hpp>

#include <cmath>

#include "pgvi/rng.hpp"

using namespace pgvi;

TEST_CASE("identical seeds reproduce identical draws") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    REQUIRE(a.uniform() == b.uniform());
    REQUIRE(a.normal() == b.normal());
    REQUIRE(a.poisson(3.0) == b.poisson(3.0));
    REQUIRE(a.gamma(2.5) == b.gamma(2.5));
  }
}

TEST_CASE("derived streams are independent of sibling consumption") {
  // Adding draws on one named stream must not perturb another.
  const std::uint64_t s1 = derive_seed(7, "env");
  const std::uint64_t s2 = derive_seed(7, "model");
  REQUIRE(s1 != s2);
  REQUIRE(derive_seed(7, "env") == s1);
  REQUIRE(derive_seed(7, "env", 1) != s1);
}

TEST_CASE("poisson moments") {
  Rng rng(123);
  const double rate = 3.0;
  double sum = 0.0, sumsq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const int k = rng.poisson(rate);
    sum += k;
    sumsq += static_cast<double>(k) * k;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  REQUIRE(mean == Approx(rate).margin(0.03));
  REQUIRE(var == Approx(rate).margin(0.08));
  REQUIRE(Rng(5).poisson(0.0) == 0);
}

TEST_CASE("normal moments") {
  Rng rng(99);
  double sum = 0.0, sumsq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sumsq += z * z;
  }
  REQUIRE(sum / n == Approx(0.0).margin(0.01));
  REQUIRE(sumsq / n == Approx(1.0).margin(0.02));
}

TEST_CASE("gamma moments") {
  Rng rng(7);
  const double shape = 0.7; // exercises the boost branch
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) sum += rng.gamma(shape);
  REQUIRE(sum / n == Approx(shape).margin(0.02));
}

TEST_CASE("categorical respects weights") {
  Rng rng(11);
  Eigen::VectorXd w(3);
  w << 1.0, 2.0, 1.0;
  Eigen::Vector3d counts = Eigen::Vector3d::Zero();
  const int n = 40000;
  for (int i = 0; i < n; ++i) counts[rng.categorical(w)] += 1.0;
  REQUIRE(counts[1] / n == Approx(0.5).margin(0.02));
  REQUIRE(counts[0] / n == Approx(0.25).margin(0.02));
}

TEST_CASE("dirichlet draw sums to one") {
  Rng rng(3);
  Eigen::VectorXd a(4);
  a << 0.5, 1.0, 2.0, 3.0;
  const Eigen::VectorXd p = rng.dirichlet(a);
  REQUIRE(p.sum() == Approx(1.0).epsilon(1e-12));
  REQUIRE((p.array() >= 0.0).all());
}
