#include "toolmeta/language/pca.hpp"

#include <Eigen/Eigenvalues>

#include "toolmeta/errors.hpp"

namespace toolmeta::lang {

Eigen::MatrixXd PcaResult::reconstruct() const {
  Eigen::MatrixXd x = projected * components.transpose();
  x.rowwise() += mean.transpose();
  return x;
}

PcaResult pca_project(const Eigen::MatrixXd& x, std::size_t out_dim) {
  const auto n = x.rows(), d = x.cols();
  if (out_dim == 0) throw Error("pca: out_dim must be positive");
  if (static_cast<Eigen::Index>(out_dim) > d)
    throw Error("pca: out_dim exceeds the input width");
  if (static_cast<Eigen::Index>(out_dim) > n) throw Error("pca: fewer samples than out_dim");

  PcaResult r;
  r.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - r.mean.transpose();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw Error("pca: eigen decomposition failed");

  // Eigenvalues come in increasing order.
  const Eigen::VectorXd values = eig.eigenvalues().cwiseMax(0.0);
  const double total = values.sum();
  const double floor = 1e-12 * std::max(values.maxCoeff(), 1e-300);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = d - 1; i >= 0 && keep.size() < out_dim; --i)
    if (values(i) > floor) keep.push_back(i);
  r.rank_truncated = keep.size() < out_dim;

  r.components.resize(d, static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    r.components.col(static_cast<Eigen::Index>(k)) = eig.eigenvectors().col(keep[k]);
    r.explained_ratio.push_back(total > 0 ? values(keep[k]) / total : 0.0);
  }
  r.projected = centered * r.components;
  return r;
}

}  // namespace toolmeta::lang
