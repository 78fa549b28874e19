#include "rpsc/rpca.hpp"

#include "rpsc/error.hpp"

#include <algorithm>
#include <cmath>

namespace rpsc {

Matrix soft_threshold(const Matrix& x, double tau) {
  if (tau < 0.0) throw ValidationError("soft_threshold: tau must be non-negative");
  return x.unaryExpr([tau](double v) {
    const double m = std::abs(v) - tau;
    return m > 0.0 ? std::copysign(m, v) : 0.0;
  });
}

Matrix singular_value_threshold(const Matrix& x, double tau, std::size_t& rank) {
  if (tau < 0.0) throw ValidationError("singular_value_threshold: tau must be non-negative");
  if (!x.allFinite()) throw NumericalError("singular_value_threshold: non-finite input");
  rank = 0;
  if (x.size() == 0) return x;
  const Eigen::BDCSVD<Matrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw NumericalError("singular_value_threshold: SVD failed");
  const Vector& s = svd.singularValues();
  Eigen::Index r = 0;
  while (r < s.size() && s(r) > tau) ++r;
  rank = static_cast<std::size_t>(r);
  if (r == 0) return Matrix::Zero(x.rows(), x.cols());
  const Vector shrunk = s.head(r).array() - tau;
  return svd.matrixU().leftCols(r) * shrunk.asDiagonal() * svd.matrixV().leftCols(r).transpose();
}

Matrix singular_value_threshold(const Matrix& x, double tau) {
  std::size_t rank = 0;
  return singular_value_threshold(x, tau, rank);
}

double nuclear_norm(const Matrix& x) {
  if (x.size() == 0) return 0.0;
  return Eigen::BDCSVD<Matrix>(x).singularValues().sum();
}

RpcaConfig default_hyperparams(const Matrix& y, const Mask* mask) {
  if (y.size() == 0) throw ValidationError("default_hyperparams: empty matrix");
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  std::size_t observed = 0;
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      if (mask && !(*mask)(i, j)) continue;
      abs_sum += std::abs(y(i, j));
      sq_sum += y(i, j) * y(i, j);
      ++observed;
    }
  }
  if (!(abs_sum > 0.0)) throw ValidationError("default_hyperparams: matrix is all zeros");
  RpcaConfig cfg;
  cfg.lambda = 1.0 / std::sqrt(static_cast<double>(std::max(y.rows(), y.cols())));
  cfg.mu = static_cast<double>(observed) / (4.0 * abs_sum);
  cfg.tol = 1e-7 * std::sqrt(sq_sum);
  cfg.max_iter = 1000;
  return cfg;
}

RpcaResult rpca_admm(const Matrix& y_in, const RpcaConfig& cfg, const Mask* mask,
                     const RpcaObserver& observer) {
  if (!(cfg.lambda > 0.0 && cfg.mu > 0.0 && cfg.tol > 0.0 && cfg.max_iter > 0)) {
    throw ValidationError("rpca_admm: lambda, mu, tol and max_iter must be positive");
  }
  if (mask && (mask->rows() != y_in.rows() || mask->cols() != y_in.cols())) {
    throw ValidationError("rpca_admm: mask shape differs from data");
  }
  Matrix y = y_in;
  if (mask) y = mask->select(y_in, Matrix::Zero(y.rows(), y.cols()));
  if (!y.allFinite()) throw ValidationError("rpca_admm: non-finite input");

  const double inv_mu = 1.0 / cfg.mu;
  const double shrink = cfg.lambda / cfg.mu;

  RpcaResult res;
  res.sparse = Matrix::Zero(y.rows(), y.cols());
  res.low_rank = Matrix::Zero(y.rows(), y.cols());
  res.dual = Matrix::Zero(y.rows(), y.cols());
  if (!cfg.zero_dual_init && y.size() > 0) {
    const double spectral = Eigen::BDCSVD<Matrix>(y).singularValues()(0);
    const double scale = std::max(spectral, y.cwiseAbs().maxCoeff() / cfg.lambda);
    if (scale > 0.0) res.dual = y / scale;
  }

  Matrix l_arg(y.rows(), y.cols());
  Matrix s_arg(y.rows(), y.cols());
  for (std::size_t it = 1; it <= cfg.max_iter; ++it) {
    l_arg = y - res.sparse - inv_mu * res.dual;
    std::size_t rank = 0;
    res.low_rank = singular_value_threshold(l_arg, inv_mu, rank);

    s_arg = y - res.low_rank - inv_mu * res.dual;
    res.sparse = soft_threshold(s_arg, shrink);
    if (mask) res.sparse = mask->select(res.sparse, s_arg);

    Matrix gap = res.low_rank + res.sparse - y;
    res.dual += cfg.mu * gap;
    if (mask) {
      res.dual = mask->select(res.dual, Matrix::Zero(y.rows(), y.cols()));
      gap = mask->select(gap, Matrix::Zero(y.rows(), y.cols()));
    }
    res.residual = gap.norm();
    res.iterations = it;

    if (!std::isfinite(res.residual) || !res.dual.allFinite()) {
      throw NumericalError("rpca_admm: iterate became non-finite at iteration " + std::to_string(it));
    }
    if (observer) {
      observer(RpcaIterate{it, res.low_rank, res.sparse, res.dual, l_arg, s_arg, rank, res.residual});
    }
    if (res.residual <= cfg.tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

SpectrumReport spectrum_report(const Matrix& y) {
  if (y.size() == 0) throw ValidationError("spectrum_report: empty matrix");
  SpectrumReport r;
  r.singular_values = Eigen::BDCSVD<Matrix>(y).singularValues();
  const Vector sq = r.singular_values.cwiseAbs2();
  const double total = sq.sum();
  r.cumulative.resize(sq.size());
  double acc = 0.0;
  for (Eigen::Index k = 0; k < sq.size(); ++k) {
    acc += sq(k);
    r.cumulative(k) = total > 0.0 ? acc / total : 0.0;
  }
  return r;
}

}  // namespace rpsc
