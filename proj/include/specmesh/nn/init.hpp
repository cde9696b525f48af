#pragma once

#include <cmath>

#include "specmesh/core/rng.hpp"
#include "specmesh/core/tensor.hpp"

namespace specmesh {

/// Uniform in [-sqrt(6 / fan_in), sqrt(6 / fan_in)]. Draws are made in double
/// precision so single and double models built from one seed agree.
template <typename T>
void init_fan_in_uniform(Tensor<T>& w, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<T>(rng.uniform(-bound, bound));
}

}  // namespace specmesh
