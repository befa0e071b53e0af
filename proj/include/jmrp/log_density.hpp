#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace jmrp {

/// A differentiable log density over R^n, the interface the sampler consumes.
/// Implementations must be safe to call concurrently.
class LogDensity {
 public:
  virtual ~LogDensity() = default;
  virtual std::size_t dimension() const = 0;
  /// Returns log p(x) and writes d log p / dx into grad (size dimension()).
  virtual double log_density_gradient(std::span<const double> x, std::span<double> grad) const = 0;
  virtual std::vector<std::string> coordinate_names() const;
};

}  // namespace jmrp
