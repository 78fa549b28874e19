#pragma once

#include "rpsc/panel.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace rpsc {

enum class Kernel { Epanechnikov, Gaussian };

Kernel parse_kernel(const std::string& name);

struct SmoothingConfig {
  Kernel kernel = Kernel::Epanechnikov;
  // Unset bandwidths use 1.5 * span * n_times^(-1/5).
  std::optional<double> bandwidth_mean;
  std::optional<double> bandwidth_cov;
  // Unset: the distinct observed times when regularly spaced, else 100
  // equispaced points.
  std::optional<std::size_t> grid_size;
};

/// Observed (time, value) pairs of one unit, times increasing.
struct Curve {
  std::vector<double> times;
  std::vector<double> values;
};

/// Observed pre-intervention entries of every unit, in panel order.
std::vector<Curve> pre_period_curves(const Panel& panel);

struct FpcaResult {
  Vector grid;
  Vector mean;
  Matrix covariance;      // G x G, symmetric
  Vector eigenvalues;     // descending, strictly positive
  Matrix eigenfunctions;  // K x G, unit norm under trapezoid quadrature
  Matrix scores;          // units x K
  Vector explained;       // cumulative explained-variance ratios
  double bandwidth_mean = 0.0;
  double bandwidth_cov = 0.0;
};

double kernel_weight(Kernel kernel, double u);

/// Trapezoid-rule quadrature weights on a sorted grid.
Vector trapezoid_weights(const Vector& grid);

Vector make_grid(const std::vector<Curve>& curves, const SmoothingConfig& cfg);

double auto_bandwidth(const std::vector<Curve>& curves);

/// Pooled local linear estimate of the mean curve at each grid point.
Vector estimate_mean(const std::vector<Curve>& curves, const Vector& grid,
                     const SmoothingConfig& cfg);

/// Local quadratic smoother of the off-diagonal raw covariances
/// (Y(t) - mu(t)) (Y(t') - mu(t')), symmetrized after smoothing.
/// `mean` is evaluated on `grid` and interpolated to the observed times.
Matrix smooth_covariance(const std::vector<Curve>& curves, const Vector& grid, const Vector& mean,
                         const SmoothingConfig& cfg);

struct Eigenpairs {
  Vector values;     // descending
  Matrix functions;  // K x G
};

/// Discretized eigenproblem of the covariance operator: decomposes
/// W^1/2 C W^1/2 with trapezoid weights W. Eigenvalues below
/// 1e-10 * lambda_max (including negative ones) are dropped together with
/// their functions.
Eigenpairs eigen_decompose(const Matrix& surface, const Vector& grid);

/// Quadrature scores of each curve against each eigenfunction. Curves with
/// gaps integrate over their observed support and rescale to the grid span.
Matrix compute_scores(const std::vector<Curve>& curves, const Vector& grid, const Vector& mean,
                      const Matrix& eigenfunctions);

Vector cumulative_explained(const Vector& eigenvalues);

/// Smallest K whose leading eigenvalues explain at least `threshold` of the
/// total.
std::size_t select_num_scores(const Vector& eigenvalues, double threshold);

FpcaResult run_fpca(const std::vector<Curve>& curves, const SmoothingConfig& cfg);

/// Linear interpolation of grid values at `t`; constant beyond the ends.
double interpolate(const Vector& grid, const Vector& values, double t);

}  // namespace rpsc
