#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "cpn/network.hpp"

namespace cpn {

enum class Method { ExplicitEuler, RK4Fixed, AdaptiveStiff };

/// Fixed-step methods use dt_init as their step. The adaptive method uses it as
/// the first trial step, capped at dt_max.
struct IntegrationOptions {
  Method method = Method::AdaptiveStiff;
  double dt_init = 1e-6;
  double dt_min = 1e-20;
  double dt_max = std::numeric_limits<double>::infinity();
  double rel_tol = 1e-8;
  // Unset: 1e-12 times the largest initial concentration.
  std::optional<double> abs_tol;
  std::size_t max_steps = 1'000'000;
};

struct StepEvent {
  enum class Kind { Clamp, Reject };
  Kind kind = Kind::Clamp;
  std::size_t step = 0;  // index of the state the event led to (or was rejected from)
  double t = 0.0;
  double dt = 0.0;
};

/// Every accepted state with its stored rate of change.
struct Trajectory {
  std::vector<SystemState> states;
  std::vector<std::vector<double>> derivatives;
  std::vector<StepEvent> events;

  std::size_t size() const noexcept { return states.size(); }
  bool empty() const noexcept { return states.empty(); }
  const SystemState& back() const { return states.back(); }
  std::vector<double> times() const;
  std::vector<double> series(std::size_t species) const;
  std::vector<double> derivative_series(std::size_t species) const;

  void push(SystemState state, std::vector<double> dndt);
};

double resolve_abs_tol(const IntegrationOptions& opts, const SystemState& state0);
void validate(const IntegrationOptions& opts);

Trajectory integrate(const ReactionNetwork& net, const SystemState& state0, double t_end,
                     const IntegrationOptions& opts = {});

/// Same as integrate(), but stops after the first accepted state for which
/// `stop` returns true. The final state is then earlier than t_end.
Trajectory integrate_until(const ReactionNetwork& net, const SystemState& state0, double t_end,
                           const IntegrationOptions& opts,
                           const std::function<bool(const SystemState&, std::span<const double>)>& stop);

struct SteadyState {
  SystemState state;
  bool converged = false;
};

/// First accepted state with ||dN/dt||_inf / max(||N||_inf, abs_tol) <= tol;
/// otherwise the state at t_cap with converged == false.
SteadyState steady_state(const ReactionNetwork& net, const SystemState& state0, double tol,
                         double t_cap, const IntegrationOptions& opts = {});

/// Nearest accepted step to each requested time.
std::vector<std::size_t> nearest_steps(const Trajectory& traj, std::span<const double> times);

}  // namespace cpn
