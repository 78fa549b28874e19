#pragma once

#include "rpsc/panel.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace rpsc {

struct Clustering {
  std::size_t k = 0;
  std::vector<std::size_t> assignment;  // one cluster index per point
  Matrix centers;                       // k x dims
  double wss = 0.0;                     // within-cluster sum of squares
  double silhouette = 0.0;              // mean s(i); NaN when k == 1
  std::size_t iterations = 0;
  std::vector<double> wss_trace;        // WSS after each Lloyd update
};

/// Best of `restarts` Lloyd runs, each started from k distinct data points
/// drawn without replacement. Restart r draws from stream (seed, k, r).
/// A cluster that empties is reseeded at the point farthest from its center.
Clustering kmeans(const Matrix& points, std::size_t k, std::size_t restarts, std::uint64_t seed);

double within_ss(const Matrix& points, const std::vector<std::size_t>& assignment,
                 const Matrix& centers);

struct Silhouette {
  std::vector<double> per_point;
  double mean = 0.0;
};

/// Center-based silhouette: a(i) is the distance to the own center, b(i) the
/// distance to the nearest other center, s(i) = (b - a) / max(a, b).
Silhouette silhouette(const Matrix& points, const std::vector<std::size_t>& assignment,
                      const Matrix& centers);

struct TuneRow {
  std::size_t k = 0;
  double wss = 0.0;
  double silhouette = 0.0;
};

struct TuneResult {
  std::vector<TuneRow> table;
  std::size_t selected_k = 0;
  Clustering best;  // clustering at selected_k
};

/// Runs kmeans for each k in [k_min, k_max] and picks the largest mean
/// silhouette; ties go to the smaller k.
TuneResult tune_k(const Matrix& points, std::size_t k_min, std::size_t k_max, std::size_t restarts,
                  std::uint64_t seed);

/// Units sharing the treated unit's cluster, treated excluded, in panel order.
std::vector<std::size_t> donor_pool(const Clustering& clustering, std::size_t treated);

std::size_t count_distinct_rows(const Matrix& points);

}  // namespace rpsc
