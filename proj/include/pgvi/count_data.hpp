#pragma once

// Multinomial count matrices over a covariate space, and the derived
// stick-breaking statistics b_ck = N_c - sum_{j<k} x_cj, kappa_ck = x_ck - b_ck/2.

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pgvi/numeric.hpp"

namespace pgvi {

struct CountMatrix {
  Eigen::MatrixXd counts;     // C x K, nonnegative integers
  Eigen::VectorXd row_totals; // length C

  Eigen::Index C() const { return counts.rows(); }
  Eigen::Index K() const { return counts.cols(); }
};

inline CountMatrix make_count_matrix(Eigen::MatrixXd counts) {
  if (counts.cols() < 2) {
    throw std::invalid_argument("count matrix needs K >= 2 categories");
  }
  if (counts.rows() < 1) {
    throw std::invalid_argument("count matrix needs C >= 1 rows");
  }
  for (Eigen::Index c = 0; c < counts.rows(); ++c) {
    for (Eigen::Index k = 0; k < counts.cols(); ++k) {
      const double x = counts(c, k);
      if (!(x >= 0.0) || x != std::floor(x)) {
        throw std::invalid_argument("count matrix entries must be nonnegative integers");
      }
    }
  }
  Eigen::VectorXd totals = counts.rowwise().sum();
  return {std::move(counts), std::move(totals)};
}

inline CountMatrix zero_counts(Eigen::Index C, Eigen::Index K) {
  return make_count_matrix(Eigen::MatrixXd::Zero(C, K));
}

struct StickStats {
  Eigen::MatrixXd b;     // C x (K-1), residual trial counts
  Eigen::MatrixXd kappa; // C x (K-1), centered counts x - b/2
  double log_binom_sum = 0.0; // sum_ck log C(b_ck, x_ck); data constant
};

inline StickStats compute_stick_stats(const CountMatrix& x) {
  const Eigen::Index C = x.C();
  const Eigen::Index K = x.K();
  StickStats s;
  s.b.resize(C, K - 1);
  s.kappa.resize(C, K - 1);
  s.log_binom_sum = 0.0;
  for (Eigen::Index c = 0; c < C; ++c) {
    double residual = x.row_totals[c];
    for (Eigen::Index k = 0; k + 1 < K; ++k) {
      s.b(c, k) = residual;
      s.kappa(c, k) = x.counts(c, k) - 0.5 * residual;
      s.log_binom_sum += log_binom(residual, x.counts(c, k));
      residual -= x.counts(c, k);
    }
  }
  return s;
}

/// Reads a count matrix from CSV with header `covariate_id,k1,...,kK`.
/// Rows must be sorted by covariate_id = 0..C-1.
inline CountMatrix read_count_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw std::invalid_argument("count CSV: empty file");
  }
  if (line.rfind("covariate_id,", 0) != 0) {
    throw std::invalid_argument("count CSV: header must start with 'covariate_id,'");
  }
  Eigen::Index k_cols = 0;
  for (char ch : line) {
    if (ch == ',') ++k_cols;
  }
  std::vector<std::vector<double>> rows;
  Eigen::Index expected_id = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<double> row;
    while (std::getline(ss, field, ',')) {
      row.push_back(std::stod(field));
    }
    if (static_cast<Eigen::Index>(row.size()) != k_cols + 1) {
      throw std::invalid_argument("count CSV: wrong number of fields in row");
    }
    if (static_cast<Eigen::Index>(row[0]) != expected_id++) {
      throw std::invalid_argument("count CSV: covariate_id must run 0..C-1 in order");
    }
    row.erase(row.begin());
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd counts(static_cast<Eigen::Index>(rows.size()), k_cols);
  for (Eigen::Index c = 0; c < counts.rows(); ++c) {
    for (Eigen::Index k = 0; k < k_cols; ++k) counts(c, k) = rows[c][k];
  }
  return make_count_matrix(std::move(counts));
}

inline CountMatrix read_count_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("count CSV: cannot open " + path);
  return read_count_csv(in);
}

inline void write_count_csv(std::ostream& out, const CountMatrix& x) {
  out << "covariate_id";
  for (Eigen::Index k = 0; k < x.K(); ++k) out << ",k" << (k + 1);
  out << "\n";
  for (Eigen::Index c = 0; c < x.C(); ++c) {
    out << c;
    for (Eigen::Index k = 0; k < x.K(); ++k) {
      out << "," << static_cast<long long>(x.counts(c, k));
    }
    out << "\n";
  }
}

} // namespace pgvi
