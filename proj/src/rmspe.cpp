#include "rpsc/rmspe.hpp"

#include "rpsc/error.hpp"

#include <cmath>

namespace rpsc {

double rmspe(const Vector& actual, const Vector& predicted, std::size_t begin, std::size_t end,
             const Eigen::Array<bool, Eigen::Dynamic, 1>* observed) {
  if (actual.size() != predicted.size()) throw ValidationError("rmspe: series lengths differ");
  if (end > static_cast<std::size_t>(actual.size()) || begin >= end) {
    throw ValidationError("rmspe: empty or out-of-range window");
  }
  double acc = 0.0;
  std::size_t n = 0;
  for (auto t = static_cast<Eigen::Index>(begin); t < static_cast<Eigen::Index>(end); ++t) {
    if (observed && !(*observed)(t)) continue;
    const double d = actual(t) - predicted(t);
    acc += d * d;
    ++n;
  }
  if (n == 0) throw ValidationError("rmspe: no observed points in window");
  return std::sqrt(acc / static_cast<double>(n));
}

}  // namespace rpsc
