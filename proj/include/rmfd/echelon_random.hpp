#pragma once

#include <random>

namespace rmfd {

template <class Rng>
RmfdModel random_canonical_model(const EchelonPattern& pattern, Rng& rng, double scale, double max_radius) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> values(static_cast<std::size_t>(pattern.free_count()));
  for (auto& v : values) v = scale * normal(rng);
  RmfdModel model = model_from_pattern_values(pattern, values);
  stabilize(model, max_radius);
  return model;
}

}  // namespace rmfd
