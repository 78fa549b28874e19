#include "rpsc/fpca.hpp"

#include "rpsc/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace rpsc {

namespace {

constexpr std::size_t kIrregularGridSize = 100;

// Pooled observations binned by distinct time: counts and value sums per time.
struct Binned {
  std::vector<double> times;
  std::vector<double> counts;
  std::vector<double> sums;
};

std::vector<double> distinct_times(const std::vector<Curve>& curves) {
  std::vector<double> times;
  for (const auto& c : curves) times.insert(times.end(), c.times.begin(), c.times.end());
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  return times;
}

std::size_t index_of(const std::vector<double>& sorted, double t) {
  return static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), t) -
                                  sorted.begin());
}

Binned bin(const std::vector<Curve>& curves) {
  Binned b;
  b.times = distinct_times(curves);
  b.counts.assign(b.times.size(), 0.0);
  b.sums.assign(b.times.size(), 0.0);
  for (const auto& c : curves) {
    for (std::size_t k = 0; k < c.times.size(); ++k) {
      const auto a = index_of(b.times, c.times[k]);
      b.counts[a] += 1.0;
      b.sums[a] += c.values[k];
    }
  }
  return b;
}

std::string describe_point(double t) {
  std::ostringstream os;
  os << t;
  return os.str();
}

double local_linear(const Binned& b, double t, double h, Kernel kernel) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, r0 = 0.0, r1 = 0.0;
  for (std::size_t a = 0; a < b.times.size(); ++a) {
    const double k = kernel_weight(kernel, (b.times[a] - t) / h);
    if (k == 0.0) continue;
    // Regressor (t - t_a), scaled by h for conditioning.
    const double x = (t - b.times[a]) / h;
    const double w = k * b.counts[a];
    s0 += w;
    s1 += w * x;
    s2 += w * x * x;
    r0 += k * b.sums[a];
    r1 += k * x * b.sums[a];
  }
  if (s0 <= 0.0) {
    throw ValidationError("mean bandwidth too small: zero kernel weight at grid point t=" +
                          describe_point(t));
  }
  const double det = s0 * s2 - s1 * s1;
  if (det <= 1e-12 * s0 * std::max(s2, 1e-300)) return r0 / s0;
  return (s2 * r0 - s1 * r1) / det;
}

}  // namespace

Kernel parse_kernel(const std::string& name) {
  if (name == "epanechnikov") return Kernel::Epanechnikov;
  if (name == "gaussian") return Kernel::Gaussian;
  throw ValidationError("unknown kernel '" + name + "' (expected epanechnikov or gaussian)");
}

double kernel_weight(Kernel kernel, double u) {
  switch (kernel) {
    case Kernel::Epanechnikov:
      return std::abs(u) <= 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
    case Kernel::Gaussian:
      return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
  }
  return 0.0;
}

std::vector<Curve> pre_period_curves(const Panel& panel) {
  if (!panel.t0) throw ValidationError("pre_period_curves: intervention index not set");
  const auto t0 = static_cast<Eigen::Index>(*panel.t0);
  std::vector<Curve> curves(panel.units());
  for (Eigen::Index i = 0; i < panel.values.rows(); ++i) {
    auto& c = curves[static_cast<std::size_t>(i)];
    for (Eigen::Index t = 0; t < t0; ++t) {
      if (!panel.mask(i, t)) continue;
      c.times.push_back(panel.time_labels[static_cast<std::size_t>(t)]);
      c.values.push_back(panel.values(i, t));
    }
  }
  return curves;
}

Vector trapezoid_weights(const Vector& grid) {
  const auto G = grid.size();
  Vector w = Vector::Zero(G);
  for (Eigen::Index i = 0; i + 1 < G; ++i) {
    const double half = 0.5 * (grid(i + 1) - grid(i));
    w(i) += half;
    w(i + 1) += half;
  }
  return w;
}

Vector make_grid(const std::vector<Curve>& curves, const SmoothingConfig& cfg) {
  const auto times = distinct_times(curves);
  if (times.size() < 2) throw ValidationError("need at least 2 distinct observed times");
  if (!cfg.grid_size && has_regular_spacing(times)) {
    return Eigen::Map<const Vector>(times.data(), static_cast<Eigen::Index>(times.size()));
  }
  const std::size_t G = cfg.grid_size.value_or(kIrregularGridSize);
  if (G < 2) throw ValidationError("grid size must be at least 2");
  return Vector::LinSpaced(static_cast<Eigen::Index>(G), times.front(), times.back());
}

double auto_bandwidth(const std::vector<Curve>& curves) {
  const auto times = distinct_times(curves);
  if (times.size() < 2) throw ValidationError("need at least 2 distinct observed times");
  const double span = times.back() - times.front();
  return 1.5 * span * std::pow(static_cast<double>(times.size()), -0.2);
}

Vector estimate_mean(const std::vector<Curve>& curves, const Vector& grid,
                     const SmoothingConfig& cfg) {
  const Binned b = bin(curves);
  if (b.times.size() < 2) throw ValidationError("need at least 2 distinct observed times");
  const double h = cfg.bandwidth_mean.value_or(auto_bandwidth(curves));
  if (!(h > 0.0)) throw ValidationError("mean bandwidth must be positive");
  Vector mean(grid.size());
  for (Eigen::Index g = 0; g < grid.size(); ++g) mean(g) = local_linear(b, grid(g), h, cfg.kernel);
  return mean;
}

Matrix smooth_covariance(const std::vector<Curve>& curves, const Vector& grid, const Vector& mean,
                         const SmoothingConfig& cfg) {
  const auto times = distinct_times(curves);
  const auto D = static_cast<Eigen::Index>(times.size());
  const auto M = static_cast<Eigen::Index>(curves.size());
  const auto G = grid.size();
  const double h = cfg.bandwidth_cov.value_or(auto_bandwidth(curves));
  if (!(h > 0.0)) throw ValidationError("covariance bandwidth must be positive");

  // Residuals and observation indicators on the distinct-time axis. The raw
  // covariance sums over units then reduce to Gram matrices, accumulated in
  // unit order.
  Matrix resid = Matrix::Zero(M, D);
  Matrix observed = Matrix::Zero(M, D);
  for (Eigen::Index j = 0; j < M; ++j) {
    const auto& c = curves[static_cast<std::size_t>(j)];
    for (std::size_t k = 0; k < c.times.size(); ++k) {
      const auto a = static_cast<Eigen::Index>(index_of(times, c.times[k]));
      resid(j, a) = c.values[k] - interpolate(grid, mean, c.times[k]);
      observed(j, a) = 1.0;
    }
  }
  Matrix sums = resid.transpose() * resid;
  Matrix counts = observed.transpose() * observed;
  sums.diagonal().setZero();
  counts.diagonal().setZero();
  if (counts.sum() <= 0.0) {
    throw ValidationError("no unit has two observed times; covariance is undefined");
  }

  // Weighted normal equations for the local fit
  //   C(t_a, t_b) ~ b0 + b1 (t - t_a) + b2 (t' - t_b)^2
  // are separable in (a, b), so each moment is K1^(p) * counts * K2^(q)^T.
  Matrix k1(G, D), k2(G, D), u(G, D), v(G, D);
  for (Eigen::Index g = 0; g < G; ++g) {
    for (Eigen::Index a = 0; a < D; ++a) {
      const double ta = times[static_cast<std::size_t>(a)];
      k1(g, a) = kernel_weight(cfg.kernel, (ta - grid(g)) / h);
      k2(g, a) = k1(g, a);
      u(g, a) = (grid(g) - ta) / h;
      v(g, a) = u(g, a) * u(g, a);
    }
  }
  const Matrix k1u = k1.cwiseProduct(u);
  const Matrix k1uu = k1u.cwiseProduct(u);
  const Matrix k2v = k2.cwiseProduct(v);
  const Matrix k2vv = k2v.cwiseProduct(v);

  const Matrix cK2 = counts * k2.transpose();
  const Matrix cK2v = counts * k2v.transpose();
  const Matrix cK2vv = counts * k2vv.transpose();
  const Matrix m00 = k1 * cK2;
  const Matrix m10 = k1u * cK2;
  const Matrix m01 = k1 * cK2v;
  const Matrix m20 = k1uu * cK2;
  const Matrix m11 = k1u * cK2v;
  const Matrix m02 = k1 * cK2vv;
  const Matrix sK2 = sums * k2.transpose();
  const Matrix r0 = k1 * sK2;
  const Matrix r1 = k1u * sK2;
  const Matrix r2 = k1 * (sums * k2v.transpose());

  Matrix surface(G, G);
  for (Eigen::Index g = 0; g < G; ++g) {
    for (Eigen::Index q = 0; q < G; ++q) {
      const double w = m00(g, q);
      if (w <= 0.0) {
        throw ValidationError("covariance bandwidth too small: zero kernel weight at (" +
                              describe_point(grid(g)) + ", " + describe_point(grid(q)) + ")");
      }
      Eigen::Matrix3d A;
      A << w, m10(g, q), m01(g, q),
           m10(g, q), m20(g, q), m11(g, q),
           m01(g, q), m11(g, q), m02(g, q);
      const Eigen::Vector3d rhs(r0(g, q), r1(g, q), r2(g, q));
      const Eigen::LDLT<Eigen::Matrix3d> ldlt(A);
      if (ldlt.info() == Eigen::Success && ldlt.isPositive() && ldlt.rcond() > 1e-12) {
        surface(g, q) = ldlt.solve(rhs)(0);
      } else {
        surface(g, q) = rhs(0) / w;
      }
    }
  }
  return 0.5 * (surface + surface.transpose());
}

Eigenpairs eigen_decompose(const Matrix& surface, const Vector& grid) {
  const auto G = grid.size();
  if (surface.rows() != G || surface.cols() != G) {
    throw ValidationError("eigen_decompose: surface shape does not match grid");
  }
  const double scale = std::max(1.0, surface.cwiseAbs().maxCoeff());
  if ((surface - surface.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale) {
    throw ValidationError("eigen_decompose: covariance surface is not symmetric");
  }
  const Vector w = trapezoid_weights(grid);
  const Vector sw = w.cwiseSqrt();
  const Matrix weighted = sw.asDiagonal() * surface * sw.asDiagonal();
  const Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (weighted + weighted.transpose()));
  if (solver.info() != Eigen::Success) throw NumericalError("eigen_decompose: solver failed");

  const Vector& vals = solver.eigenvalues();  // ascending
  const double lmax = vals(G - 1);
  const double cutoff = 1e-10 * std::max(lmax, 0.0);

  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = G - 1; i >= 0; --i) {
    if (vals(i) > cutoff && vals(i) > 0.0) keep.push_back(i);
  }
  Eigenpairs out;
  out.values.resize(static_cast<Eigen::Index>(keep.size()));
  out.functions.resize(static_cast<Eigen::Index>(keep.size()), G);
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const auto i = keep[k];
    const auto r = static_cast<Eigen::Index>(k);
    out.values(r) = vals(i);
    Vector phi = solver.eigenvectors().col(i).cwiseQuotient(sw);
    phi /= std::sqrt(phi.cwiseAbs2().dot(w));
    // Fix the sign so results are reproducible: positive integral, or a
    // positive largest entry when the integral vanishes.
    const double integral = phi.dot(w);
    Eigen::Index imax = 0;
    phi.cwiseAbs().maxCoeff(&imax);
    const double span = grid(G - 1) - grid(0);
    if (integral < -1e-9 * span * std::abs(phi(imax)) ||
        (std::abs(integral) <= 1e-9 * span * std::abs(phi(imax)) && phi(imax) < 0.0)) {
      phi = -phi;
    }
    out.functions.row(r) = phi.transpose();
  }
  return out;
}

double interpolate(const Vector& grid, const Vector& values, double t) {
  const auto G = grid.size();
  if (t <= grid(0)) return values(0);
  if (t >= grid(G - 1)) return values(G - 1);
  const auto* begin = grid.data();
  const auto hi = std::upper_bound(begin, begin + G, t) - begin;
  const auto lo = hi - 1;
  const double f = (t - grid(lo)) / (grid(hi) - grid(lo));
  return values(lo) + f * (values(hi) - values(lo));
}

Matrix compute_scores(const std::vector<Curve>& curves, const Vector& grid, const Vector& mean,
                      const Matrix& eigenfunctions) {
  const auto K = eigenfunctions.rows();
  const double span = grid(grid.size() - 1) - grid(0);
  Matrix scores(static_cast<Eigen::Index>(curves.size()), K);
  for (std::size_t j = 0; j < curves.size(); ++j) {
    const auto& c = curves[j];
    if (c.times.size() < 2) {
      throw ValidationError("unit " + std::to_string(j) +
                            " has fewer than 2 observed pre-intervention points");
    }
    const auto n = static_cast<Eigen::Index>(c.times.size());
    const Vector t = Eigen::Map<const Vector>(c.times.data(), n);
    const Vector w = trapezoid_weights(t);
    const double observed_span = t(n - 1) - t(0);
    const double rescale = observed_span > 0.0 ? span / observed_span : 1.0;
    Vector centered(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      centered(i) = c.values[static_cast<std::size_t>(i)] - interpolate(grid, mean, t(i));
    }
    for (Eigen::Index k = 0; k < K; ++k) {
      const Vector phi_k = eigenfunctions.row(k).transpose();
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) acc += w(i) * centered(i) * interpolate(grid, phi_k, t(i));
      scores(static_cast<Eigen::Index>(j), k) = rescale * acc;
    }
  }
  return scores;
}

Vector cumulative_explained(const Vector& eigenvalues) {
  const double total = eigenvalues.sum();
  Vector out(eigenvalues.size());
  double acc = 0.0;
  for (Eigen::Index k = 0; k < eigenvalues.size(); ++k) {
    acc += eigenvalues(k);
    out(k) = total > 0.0 ? acc / total : 0.0;
  }
  return out;
}

std::size_t select_num_scores(const Vector& eigenvalues, double threshold) {
  if (eigenvalues.size() == 0) throw ValidationError("select_num_scores: no eigenvalues");
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw ValidationError("select_num_scores: threshold must lie in (0, 1]");
  }
  if (!(eigenvalues.sum() > 0.0)) throw NumericalError("select_num_scores: all eigenvalues are zero");
  const Vector cum = cumulative_explained(eigenvalues);
  for (Eigen::Index k = 0; k < cum.size(); ++k) {
    if (cum(k) >= threshold - 1e-12) return static_cast<std::size_t>(k + 1);
  }
  return static_cast<std::size_t>(cum.size());
}

FpcaResult run_fpca(const std::vector<Curve>& curves, const SmoothingConfig& cfg) {
  FpcaResult r;
  r.grid = make_grid(curves, cfg);
  r.bandwidth_mean = cfg.bandwidth_mean.value_or(auto_bandwidth(curves));
  r.bandwidth_cov = cfg.bandwidth_cov.value_or(auto_bandwidth(curves));
  SmoothingConfig resolved = cfg;
  resolved.bandwidth_mean = r.bandwidth_mean;
  resolved.bandwidth_cov = r.bandwidth_cov;
  r.mean = estimate_mean(curves, r.grid, resolved);
  r.covariance = smooth_covariance(curves, r.grid, r.mean, resolved);
  // Variance at rounding level relative to the curves themselves means there is
  // nothing to decompose.
  const Vector w = trapezoid_weights(r.grid);
  const double level = w.dot(r.mean.cwiseAbs2()) + w.dot(r.covariance.diagonal().cwiseAbs());
  auto eig = eigen_decompose(r.covariance, r.grid);
  if (eig.values.size() == 0 || !(eig.values(0) > 1e-20 * level)) {
    throw NumericalError("FPCA: covariance surface has no positive eigenvalues");
  }
  r.eigenvalues = std::move(eig.values);
  r.eigenfunctions = std::move(eig.functions);
  r.scores = compute_scores(curves, r.grid, r.mean, r.eigenfunctions);
  r.explained = cumulative_explained(r.eigenvalues);
  return r;
}

}  // namespace rpsc
