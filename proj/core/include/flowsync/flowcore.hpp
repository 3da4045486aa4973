#pragma once

#include <cstdint>
#include <vector>

#include "flowsync/grid.hpp"
#include "flowsync/rng.hpp"

namespace flowsync {

// Linear flow path with tau = 0 at data and tau = 1 at noise:
//   x_tau = (1 - tau) * clean + tau * eps,   dx/dtau = eps - clean.

struct Noised {
  Grid2D noised;
  Grid2D eps;
};

/// Draws eps ~ N(0, I) from `rng` and returns the point on the path at `tau`.
/// Throws ContractError unless tau is in [0, 1].
Noised fm_add(const Grid2D& clean, double tau, RngStream& rng);
/// Same path point for a given eps draw.
Grid2D fm_interpolate(const Grid2D& clean, const Grid2D& eps, double tau);

/// eps - clean; constant along the path.
Grid2D velocity_target(const Grid2D& clean, const Grid2D& eps);

/// Uniform descending grid tau_start = taus[0] > ... > taus[n_steps] = 0.
struct TimeGrid {
  std::vector<double> taus;

  std::size_t n_steps() const noexcept { return taus.empty() ? 0 : taus.size() - 1; }
  double tau_start() const { return taus.front(); }
};

/// Throws ConfigError if n_steps == 0 or tau_start is outside (0, 1].
TimeGrid make_time_grid(double tau_start, std::size_t n_steps);

/// round(tau * scale); maps the continuous noise level onto a discrete index.
std::int64_t tau_to_discrete(double tau, std::int64_t scale = 1000);

}  // namespace flowsync
