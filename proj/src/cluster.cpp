#include "rpsc/cluster.hpp"

#include "rpsc/error.hpp"
#include "rpsc/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace rpsc {

namespace {

constexpr std::size_t kMaxLloydIterations = 500;

std::vector<Eigen::Index> distinct_row_indices(const Matrix& points) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(points.rows()));
  std::iota(order.begin(), order.end(), 0);
  const auto less = [&points](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index c = 0; c < points.cols(); ++c) {
      if (points(a, c) != points(b, c)) return points(a, c) < points(b, c);
    }
    return a < b;
  };
  std::sort(order.begin(), order.end(), less);
  std::vector<Eigen::Index> distinct;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i == 0 || points.row(order[i]) != points.row(order[i - 1])) distinct.push_back(order[i]);
  }
  std::sort(distinct.begin(), distinct.end());
  return distinct;
}

std::size_t nearest(const Matrix& centers, const Eigen::RowVectorXd& p) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index l = 0; l < centers.rows(); ++l) {
    const double d = (centers.row(l) - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::size_t>(l);
    }
  }
  return best;
}

Clustering lloyd(const Matrix& points, Matrix centers) {
  const auto n = points.rows();
  const auto k = centers.rows();
  Clustering c;
  c.k = static_cast<std::size_t>(k);
  c.assignment.assign(static_cast<std::size_t>(n), std::numeric_limits<std::size_t>::max());

  for (std::size_t it = 0; it < kMaxLloydIterations; ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto l = nearest(centers, points.row(i));
      if (l != c.assignment[static_cast<std::size_t>(i)]) {
        c.assignment[static_cast<std::size_t>(i)] = l;
        changed = true;
      }
    }
    c.iterations = it + 1;
    if (!changed && it > 0) break;

    Matrix sums = Matrix::Zero(k, points.cols());
    std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto l = c.assignment[static_cast<std::size_t>(i)];
      sums.row(static_cast<Eigen::Index>(l)) += points.row(i);
      ++sizes[l];
    }
    for (Eigen::Index l = 0; l < k; ++l) {
      if (sizes[static_cast<std::size_t>(l)] > 0) {
        centers.row(l) = sums.row(l) / static_cast<double>(sizes[static_cast<std::size_t>(l)]);
      }
    }
    // Empty clusters: move the center onto the point farthest from its own
    // center and hand that point over.
    for (Eigen::Index l = 0; l < k; ++l) {
      if (sizes[static_cast<std::size_t>(l)] > 0) continue;
      Eigen::Index far = -1;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto own = c.assignment[static_cast<std::size_t>(i)];
        if (sizes[own] <= 1) continue;
        const double d = (points.row(i) - centers.row(static_cast<Eigen::Index>(own))).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far < 0) throw NumericalError("kmeans: cannot repair empty cluster");
      const auto old = c.assignment[static_cast<std::size_t>(far)];
      --sizes[old];
      sizes[static_cast<std::size_t>(l)] = 1;
      c.assignment[static_cast<std::size_t>(far)] = static_cast<std::size_t>(l);
      centers.row(l) = points.row(far);
      // recompute the donor cluster's center without the moved point
      Eigen::RowVectorXd s = Eigen::RowVectorXd::Zero(points.cols());
      for (Eigen::Index i = 0; i < n; ++i) {
        if (c.assignment[static_cast<std::size_t>(i)] == old) s += points.row(i);
      }
      centers.row(static_cast<Eigen::Index>(old)) = s / static_cast<double>(sizes[old]);
    }
    c.wss_trace.push_back(within_ss(points, c.assignment, centers));
  }
  c.centers = std::move(centers);
  c.wss = within_ss(points, c.assignment, c.centers);
  return c;
}

}  // namespace

std::size_t count_distinct_rows(const Matrix& points) { return distinct_row_indices(points).size(); }

double within_ss(const Matrix& points, const std::vector<std::size_t>& assignment,
                 const Matrix& centers) {
  double wss = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    wss += (points.row(i) - centers.row(static_cast<Eigen::Index>(assignment[static_cast<std::size_t>(i)])))
               .squaredNorm();
  }
  return wss;
}

Clustering kmeans(const Matrix& points, std::size_t k, std::size_t restarts, std::uint64_t seed) {
  if (k == 0) throw ValidationError("kmeans: k must be positive");
  if (restarts == 0) throw ValidationError("kmeans: restarts must be positive");
  const auto distinct = distinct_row_indices(points);
  if (k > distinct.size()) {
    throw ValidationError("kmeans: k=" + std::to_string(k) + " exceeds the " +
                          std::to_string(distinct.size()) + " distinct points");
  }

  Clustering best;
  best.wss = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < restarts; ++r) {
    auto rng = make_stream(seed, (static_cast<std::uint64_t>(k) << 32) | r);
    std::vector<Eigen::Index> pool = distinct;
    // partial Fisher-Yates: first k entries are a uniform sample
    for (std::size_t i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }
    Matrix centers(static_cast<Eigen::Index>(k), points.cols());
    for (std::size_t l = 0; l < k; ++l) centers.row(static_cast<Eigen::Index>(l)) = points.row(pool[l]);
    auto c = lloyd(points, std::move(centers));
    if (c.wss < best.wss) best = std::move(c);
  }
  if (k >= 2) {
    best.silhouette = silhouette(points, best.assignment, best.centers).mean;
  } else {
    best.silhouette = std::numeric_limits<double>::quiet_NaN();
  }
  return best;
}

Silhouette silhouette(const Matrix& points, const std::vector<std::size_t>& assignment,
                      const Matrix& centers) {
  if (centers.rows() < 2) throw ValidationError("silhouette is undefined for k=1");
  Silhouette s;
  s.per_point.reserve(static_cast<std::size_t>(points.rows()));
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const auto own = static_cast<Eigen::Index>(assignment[static_cast<std::size_t>(i)]);
    const double a = (points.row(i) - centers.row(own)).norm();
    double b = std::numeric_limits<double>::infinity();
    for (Eigen::Index l = 0; l < centers.rows(); ++l) {
      if (l != own) b = std::min(b, (points.row(i) - centers.row(l)).norm());
    }
    const double denom = std::max(a, b);
    s.per_point.push_back(denom > 0.0 ? (b - a) / denom : 0.0);
  }
  s.mean = s.per_point.empty()
               ? 0.0
               : std::accumulate(s.per_point.begin(), s.per_point.end(), 0.0) /
                     static_cast<double>(s.per_point.size());
  return s;
}

TuneResult tune_k(const Matrix& points, std::size_t k_min, std::size_t k_max, std::size_t restarts,
                  std::uint64_t seed) {
  if (k_min < 2) throw ValidationError("tune_k: silhouette needs k >= 2");
  if (k_max < k_min) throw ValidationError("tune_k: empty k range");
  TuneResult res;
  double best_sc = -std::numeric_limits<double>::infinity();
  for (std::size_t k = k_min; k <= k_max; ++k) {
    auto c = kmeans(points, k, restarts, seed);
    res.table.push_back({k, c.wss, c.silhouette});
    if (c.silhouette > best_sc) {
      best_sc = c.silhouette;
      res.selected_k = k;
      res.best = std::move(c);
    }
  }
  return res;
}

std::vector<std::size_t> donor_pool(const Clustering& clustering, std::size_t treated) {
  if (treated >= clustering.assignment.size()) throw ValidationError("donor_pool: treated index out of range");
  const auto own = clustering.assignment[treated];
  std::vector<std::size_t> donors;
  for (std::size_t i = 0; i < clustering.assignment.size(); ++i) {
    if (i != treated && clustering.assignment[i] == own) donors.push_back(i);
  }
  if (donors.empty()) throw ValidationError("no donors: the treated unit is alone in its cluster");
  return donors;
}

}  // namespace rpsc
