#pragma once

#include <Eigen/Dense>
#include <vector>

namespace toolmeta::lang {

struct PcaResult {
  Eigen::MatrixXd projected;   // n x k
  Eigen::MatrixXd components;  // d x k, orthonormal columns
  Eigen::VectorXd mean;        // d
  std::vector<double> explained_ratio;  // per component, nonincreasing
  bool rank_truncated = false;  // fewer than out_dim nonzero directions

  Eigen::MatrixXd reconstruct() const;
};

/// Rows of `x` are samples. Components with negligible variance are dropped
/// (rank_truncated set) rather than returned as arbitrary directions.
PcaResult pca_project(const Eigen::MatrixXd& x, std::size_t out_dim = 50);

}  // namespace toolmeta::lang
