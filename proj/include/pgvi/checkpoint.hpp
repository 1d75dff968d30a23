#pragma once

// JSON model checkpoints: kernel, prior means, variational parameters, and
// the ELBO trace. Finite values round-trip bit-exactly (serialized at
// shortest-round-trip precision, i.e. up to 17 significant digits).

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pgvi/kernels.hpp"
#include "pgvi/linalg.hpp"
#include "pgvi/model.hpp"

namespace pgvi {

struct ModelCheckpoint {
  HyperParams hyper;
  VariationalPosterior posterior; // stats left empty; sampling-ready
  std::vector<double> elbo_trace;
};

namespace detail {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) arr.push_back(m(i, j));
  }
  return arr;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& arr, Eigen::Index rows,
                                        Eigen::Index cols, const std::string& name) {
  if (!arr.is_array() || static_cast<Eigen::Index>(arr.size()) != rows * cols) {
    throw std::invalid_argument("checkpoint: field '" + name + "' has wrong size");
  }
  Eigen::MatrixXd m(rows, cols);
  Eigen::Index idx = 0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = arr[idx++].get<double>();
  }
  return m;
}

} // namespace detail

inline nlohmann::json checkpoint_to_json(const HyperParams& hyper,
                                         const VariationalPosterior& post,
                                         const std::vector<double>& elbo_trace) {
  const Eigen::Index C = post.C();
  const Eigen::Index K = post.K();
  nlohmann::json j;
  j["C"] = C;
  j["K"] = K;
  j["kernel"] = {
      {"type", "squared_exponential"},
      {"theta", hyper.kernel.theta},
      {"lengthscale", hyper.kernel.lengthscale},
      {"distance_matrix", detail::matrix_to_json(hyper.kernel.distance)},
  };
  j["mu"] = detail::matrix_to_json(hyper.mu);
  j["lambda"] = detail::matrix_to_json(post.lambda);
  nlohmann::json vs = nlohmann::json::array();
  for (const auto& vk : post.V) vs.push_back(detail::matrix_to_json(vk));
  j["V"] = vs;
  j["w"] = detail::matrix_to_json(post.w);
  j["elbo_trace"] = elbo_trace;
  return j;
}

inline ModelCheckpoint checkpoint_from_json(const nlohmann::json& j) {
  for (const auto& key : {"C", "K", "kernel", "mu", "lambda", "V", "w", "elbo_trace"}) {
    if (!j.contains(key)) {
      throw std::invalid_argument(std::string("checkpoint: missing field '") + key + "'");
    }
  }
  const Eigen::Index C = j["C"].get<Eigen::Index>();
  const Eigen::Index K = j["K"].get<Eigen::Index>();
  if (C < 1 || K < 2) throw std::invalid_argument("checkpoint: invalid dimensions");
  const auto& jk = j["kernel"];
  if (jk.at("type").get<std::string>() != "squared_exponential") {
    throw std::invalid_argument("checkpoint: unknown kernel type");
  }

  ModelCheckpoint ck;
  ck.hyper.kernel.theta = jk.at("theta").get<double>();
  ck.hyper.kernel.lengthscale = jk.at("lengthscale").get<double>();
  ck.hyper.kernel.distance = detail::matrix_from_json(jk.at("distance_matrix"), C, C, "distance_matrix");
  validate_kernel_spec(ck.hyper.kernel);
  ck.hyper.mu = detail::matrix_from_json(j["mu"], C, K - 1, "mu");
  ck.posterior.lambda = detail::matrix_from_json(j["lambda"], C, K - 1, "lambda");
  if (!j["V"].is_array() || static_cast<Eigen::Index>(j["V"].size()) != K - 1) {
    throw std::invalid_argument("checkpoint: field 'V' has wrong factor count");
  }
  ck.posterior.V.reserve(static_cast<std::size_t>(K - 1));
  ck.posterior.logdet_V.resize(K - 1);
  for (Eigen::Index k = 0; k + 1 < K; ++k) {
    Eigen::MatrixXd vk = detail::matrix_from_json(j["V"][k], C, C, "V");
    ck.posterior.logdet_V[k] = cholesky_with_jitter(vk, "checkpoint V").logdet();
    ck.posterior.V.push_back(std::move(vk));
  }
  ck.posterior.w = detail::matrix_from_json(j["w"], C, K - 1, "w");
  if ((ck.posterior.w.array() < 0.0).any()) {
    throw std::invalid_argument("checkpoint: negative w entry");
  }
  ck.elbo_trace = j["elbo_trace"].get<std::vector<double>>();
  return ck;
}

inline void save_checkpoint(const std::string& path, const HyperParams& hyper,
                            const VariationalPosterior& post,
                            const std::vector<double>& elbo_trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  out << checkpoint_to_json(hyper, post, elbo_trace).dump(2) << "\n";
}

inline ModelCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("checkpoint: cannot read " + path);
  nlohmann::json j;
  in >> j;
  return checkpoint_from_json(j);
}

} // namespace pgvi
