#pragma once

// Fitting rate coefficients of a network so it reproduces a target trajectory.

#include <cstddef>
#include <span>
#include <vector>

#include "cpn/integrator.hpp"
#include "cpn/network.hpp"

namespace cpn::fit {

/// A free coefficient: k of a constant rate, or the prefactor A of an
/// Arrhenius rate. Bounds are on the coefficient itself and must be > 0.
struct FreeParameter {
  std::size_t reaction = 0;
  double lower = 1e-6;
  double upper = 1e6;
};

struct FitProblem {
  ReactionNetwork network;
  SystemState initial;
  Trajectory target;                   // only states are used
  std::vector<std::size_t> species;    // compared species
  std::vector<double> weights;         // per compared species; empty means 1
  std::vector<FreeParameter> parameters;
  std::vector<double> initial_guess;   // empty: coefficients currently in `network`
  IntegrationOptions integration{};
  std::size_t max_evaluations = 3000;  // over all starts
  std::size_t starts = 4;
  std::size_t jobs = 1;
  unsigned seed = 20240611u;           // Latin grid of the extra starts
  double x_tol = 1e-9;                 // simplex size in log space
  double f_tol = 1e-14;                // loss spread, relative to the best loss plus 1e-300

  void validate() const;
};

/// Weighted squared difference over the target's samples and the selected
/// species. The candidate is resampled at the nearest step to each target time.
double trajectory_loss(const Trajectory& candidate, const Trajectory& target,
                       std::span<const std::size_t> species, std::span<const double> weights = {});

/// Integrates from `initial` and records the state exactly at each requested
/// time (times must be non-decreasing and start at or after initial.t).
Trajectory sample_trajectory(const ReactionNetwork& net, const SystemState& initial,
                             std::span<const double> times, const IntegrationOptions& opts = {});

/// Network with the free coefficients replaced by `values`.
ReactionNetwork with_parameters(const ReactionNetwork& net, std::span<const FreeParameter> params,
                                std::span<const double> values);
std::vector<double> current_parameters(const ReactionNetwork& net, std::span<const FreeParameter> params);

struct FitResult {
  std::vector<double> parameters;
  double loss = 0.0;
  double initial_loss = 0.0;
  std::size_t evaluations = 0;  // excludes the evaluation at the initial guess
  bool converged = false;
  bool budget_exhausted = false;
  std::size_t best_start = 0;
  // Best loss after each iteration, per start (non-increasing within a start).
  std::vector<std::vector<double>> accepted_losses;
};

FitResult fit_rates(const FitProblem& problem);

}  // namespace cpn::fit
