#include "rpsc/nnls.hpp"

#include "rpsc/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace rpsc {

namespace {

Vector solve_on_support(const Matrix& a, const Vector& b, const std::vector<bool>& passive) {
  std::vector<Eigen::Index> cols;
  for (std::size_t j = 0; j < passive.size(); ++j) {
    if (passive[j]) cols.push_back(static_cast<Eigen::Index>(j));
  }
  Vector z = Vector::Zero(a.cols());
  if (cols.empty()) return z;
  Matrix sub(a.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = a.col(cols[c]);
  const Vector zs = sub.colPivHouseholderQr().solve(b);
  for (std::size_t c = 0; c < cols.size(); ++c) z(cols[c]) = zs(static_cast<Eigen::Index>(c));
  return z;
}

}  // namespace

double kkt_violation(const Matrix& a, const Vector& b, const Vector& x) {
  const Vector g = a.transpose() * (a * x - b);
  double worst = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (x(j) < 0.0) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, x(j) > 0.0 ? std::abs(g(j)) : std::max(-g(j), 0.0));
  }
  return worst;
}

NnlsResult nnls(const Matrix& a, const Vector& b) {
  if (a.rows() != b.size()) throw ValidationError("nnls: dimension mismatch");
  if (!a.allFinite() || !b.allFinite()) throw ValidationError("nnls: non-finite input");
  const auto n = a.cols();

  NnlsResult res;
  res.x = Vector::Zero(n);
  const Vector atb = a.transpose() * b;
  res.kkt_tol = 1e-8 * (n > 0 ? atb.cwiseAbs().maxCoeff() : 0.0);
  if (n == 0 || res.kkt_tol == 0.0) return res;

  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  std::vector<bool> blocked(static_cast<std::size_t>(n), false);
  const std::size_t max_outer = 3 * static_cast<std::size_t>(n) + 30;

  Vector& x = res.x;
  for (std::size_t outer = 0; outer < max_outer; ++outer) {
    const Vector w = a.transpose() * (b - a * x);
    Eigen::Index enter = -1;
    double best = res.kkt_tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto u = static_cast<std::size_t>(j);
      if (!passive[u] && !blocked[u] && w(j) > best) {
        best = w(j);
        enter = j;
      }
    }
    if (enter < 0) break;
    ++res.iterations;
    passive[static_cast<std::size_t>(enter)] = true;

    for (std::size_t inner = 0; inner <= static_cast<std::size_t>(n); ++inner) {
      const Vector z = solve_on_support(a, b, passive);
      bool feasible = true;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) feasible = false;
      }
      if (feasible) {
        x = z;
        break;
      }
      // Step from x toward z until the first passive coordinate hits zero.
      double alpha = 1.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) {
          const double denom = x(j) - z(j);
          alpha = std::min(alpha, denom > 0.0 ? x(j) / denom : 0.0);
        }
      }
      x += alpha * (z - x);
      bool removed = false;
      for (Eigen::Index j = 0; j < n; ++j) {
        const auto u = static_cast<std::size_t>(j);
        if (passive[u] && x(j) <= std::numeric_limits<double>::epsilon() * std::max(1.0, x.cwiseAbs().maxCoeff())) {
          passive[u] = false;
          x(j) = 0.0;
          removed = true;
          // A column that could not stay positive right after entering is
          // numerically dependent on the support; keep it out.
          if (j == enter) blocked[u] = true;
        }
      }
      if (!removed) break;
    }
    // clear blocks once the support changes
    if (!blocked[static_cast<std::size_t>(enter)]) std::fill(blocked.begin(), blocked.end(), false);
  }
  return res;
}

}  // namespace rpsc
