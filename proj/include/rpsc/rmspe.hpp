#pragma once

#include "rpsc/panel.hpp"

#include <cstddef>

namespace rpsc {

/// Root mean squared gap between `actual` and `predicted` over [begin, end).
/// With `observed`, unobserved positions are skipped.
double rmspe(const Vector& actual, const Vector& predicted, std::size_t begin, std::size_t end,
             const Eigen::Array<bool, Eigen::Dynamic, 1>* observed = nullptr);

inline double rmspe(const Vector& actual, const Vector& predicted) {
  return rmspe(actual, predicted, 0, static_cast<std::size_t>(actual.size()));
}

}  // namespace rpsc
