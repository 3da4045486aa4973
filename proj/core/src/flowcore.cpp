#include "flowsync/flowcore.hpp"

#include <cmath>
#include <string>

#include "flowsync/error.hpp"

namespace flowsync {

Grid2D fm_interpolate(const Grid2D& clean, const Grid2D& eps, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) {
    throw ContractError("noise level must lie in [0, 1], got " + std::to_string(tau));
  }
  require_same_shape(clean, eps, "fm_interpolate");
  // Endpoints are returned as exact copies rather than relying on 0 * x.
  if (tau == 0.0) return clean;
  if (tau == 1.0) return eps;
  return axpby(1.0 - tau, clean, tau, eps);
}

Noised fm_add(const Grid2D& clean, double tau, RngStream& rng) {
  Grid2D eps(clean.height(), clean.width(), gaussian_sample(rng, clean.size()));
  Grid2D noised = fm_interpolate(clean, eps, tau);
  return {std::move(noised), std::move(eps)};
}

Grid2D velocity_target(const Grid2D& clean, const Grid2D& eps) {
  require_same_shape(clean, eps, "velocity_target");
  return axpby(1.0, eps, -1.0, clean);
}

TimeGrid make_time_grid(double tau_start, std::size_t n_steps) {
  if (n_steps == 0) throw ConfigError("sample.steps must be at least 1");
  if (!(tau_start > 0.0 && tau_start <= 1.0)) {
    throw ConfigError("sample.tau_start must lie in (0, 1], got " + std::to_string(tau_start));
  }
  TimeGrid grid;
  grid.taus.resize(n_steps + 1);
  const double n = static_cast<double>(n_steps);
  for (std::size_t i = 0; i <= n_steps; ++i) {
    // tau_start * (n - i) / n hits both endpoints exactly.
    grid.taus[i] = tau_start * (n - static_cast<double>(i)) / n;
  }
  return grid;
}

std::int64_t tau_to_discrete(double tau, std::int64_t scale) {
  if (scale < 1) throw ConfigError("discrete timestep scale must be at least 1");
  return static_cast<std::int64_t>(std::llround(tau * static_cast<double>(scale)));
}

}  // namespace flowsync
