#include <catch2/catch.hpp>

#include "pgvi/checkpoint.hpp"
#include "support/instances.hpp"

using namespace pgvi;

TEST_CASE("checkpoint round-trips bit-exactly") {
  Rng rng(500);
  auto inst = instances::random_instance(rng, 5, 4, 20);
  FitOptions opts;
  opts.max_sweeps = 20;
  opts.em_theta = true;
  const FitResult res = fit(inst.counts, inst.hyper, opts);

  const nlohmann::json j = checkpoint_to_json(res.hyper, res.posterior, res.elbo_trace);
  const std::string dumped = j.dump();
  const ModelCheckpoint ck = checkpoint_from_json(nlohmann::json::parse(dumped));

  REQUIRE(ck.posterior.lambda == res.posterior.lambda);
  REQUIRE(ck.posterior.w == res.posterior.w);
  REQUIRE(ck.hyper.mu == res.hyper.mu);
  REQUIRE(ck.hyper.kernel.theta == res.hyper.kernel.theta);
  REQUIRE(ck.hyper.kernel.lengthscale == res.hyper.kernel.lengthscale);
  REQUIRE(ck.hyper.kernel.distance == res.hyper.kernel.distance);
  for (std::size_t k = 0; k < res.posterior.V.size(); ++k) {
    REQUIRE(ck.posterior.V[k] == res.posterior.V[k]);
  }
  REQUIRE(ck.elbo_trace == res.elbo_trace);

  // Serializing the loaded model again yields identical bytes.
  REQUIRE(checkpoint_to_json(ck.hyper, ck.posterior, ck.elbo_trace).dump() == dumped);
}

TEST_CASE("loaded checkpoints are sampling-ready") {
  Rng rng(501);
  auto inst = instances::random_instance(rng, 4, 3, 15);
  const FitResult res = fit(inst.counts, inst.hyper, {});
  const ModelCheckpoint ck =
      checkpoint_from_json(checkpoint_to_json(res.hyper, res.posterior, res.elbo_trace));
  Rng r1(7), r2(7);
  const Eigen::MatrixXd a = posterior_mean_probs(ck.posterior, 200, r1);
  const Eigen::MatrixXd b = posterior_mean_probs(res.posterior, 200, r2);
  REQUIRE((a - b).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("checkpoint validation rejects malformed input") {
  Rng rng(502);
  auto inst = instances::random_instance(rng, 3, 3, 10);
  const FitResult res = fit(inst.counts, inst.hyper, {});
  nlohmann::json good = checkpoint_to_json(res.hyper, res.posterior, res.elbo_trace);

  nlohmann::json missing = good;
  missing.erase("lambda");
  REQUIRE_THROWS_AS(checkpoint_from_json(missing), std::invalid_argument);

  nlohmann::json short_v = good;
  short_v["V"].erase(0);
  REQUIRE_THROWS_AS(checkpoint_from_json(short_v), std::invalid_argument);

  nlohmann::json bad_kernel = good;
  bad_kernel["kernel"]["type"] = "matern";
  REQUIRE_THROWS_AS(checkpoint_from_json(bad_kernel), std::invalid_argument);

  nlohmann::json neg_w = good;
  neg_w["w"][0] = -1.0;
  REQUIRE_THROWS_AS(checkpoint_from_json(neg_w), std::invalid_argument);
}
