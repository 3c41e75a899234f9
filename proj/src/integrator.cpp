#include "cpn/integrator.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "cpn/error.hpp"

namespace cpn {

namespace {

using StopFn = std::function<bool(const SystemState&, std::span<const double>)>;

// Rodas3: 4-stage, order 3, L-stable and stiffly accurate; the embedded
// solution is the third stage value (order 2).
struct Rodas3 {
  static constexpr int stages = 4;
  static constexpr double gamma = 0.5;
  static constexpr double a[4][4] = {{0, 0, 0, 0}, {0, 0, 0, 0}, {2, 0, 0, 0}, {2, 0, 1, 0}};
  static constexpr double c[4][4] = {
      {0, 0, 0, 0}, {4, 0, 0, 0}, {1, -1, 0, 0}, {1, -1, -8.0 / 3.0, 0}};
  static constexpr double m[4] = {2, 0, 1, 1};
  static constexpr double e[4] = {0, 0, 0, 1};
  static constexpr double order = 3.0;
};

Eigen::VectorXd as_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> as_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

class Recorder {
 public:
  Recorder(const ReactionNetwork& net, const StopFn* stop) : net_(net), stop_(stop) {}

  // Returns true when the stop predicate fired.
  bool accept(SystemState state) {
    auto dndt = derivative(net_, state);
    const bool done = stop_ && (*stop_)(state, dndt);
    traj.push(std::move(state), std::move(dndt));
    return done;
  }

  void event(StepEvent::Kind kind, double t, double dt) {
    traj.events.push_back({kind, traj.size(), t, dt});
  }

  Trajectory traj;

 private:
  const ReactionNetwork& net_;
  const StopFn* stop_;
};

void run_fixed(const ReactionNetwork& net, const SystemState& state0, double t_end,
               const IntegrationOptions& opts, Recorder& rec) {
  const double span = t_end - state0.t;
  const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil(span / opts.dt_init - 1e-9)));
  if (n > opts.max_steps) {
    throw Error(ErrorKind::MaxStepsExceeded,
                "fixed-step integration needs " + std::to_string(n) + " steps, max_steps is " +
                    std::to_string(opts.max_steps));
  }
  const double h = span / static_cast<double>(n);
  SystemState state = state0;
  for (std::size_t i = 1; i <= n; ++i) {
    const double t_next = i == n ? t_end : state0.t + static_cast<double>(i) * h;
    bool clamped = false;
    if (opts.method == Method::ExplicitEuler) {
      auto step = euler_step(net, state, h);
      state = std::move(step.state);
      clamped = step.clamped;
    } else {
      const auto& n0 = state.concentrations;
      auto at = [&](const std::vector<double>& k, double scale) {
        SystemState s = state;
        for (std::size_t j = 0; j < n0.size(); ++j) s.concentrations[j] = n0[j] + scale * k[j];
        return s;
      };
      const auto k1 = derivative(net, state);
      const auto k2 = derivative(net, at(k1, h / 2));
      const auto k3 = derivative(net, at(k2, h / 2));
      const auto k4 = derivative(net, at(k3, h));
      for (std::size_t j = 0; j < n0.size(); ++j) {
        double v = n0[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        if (v < 0.0) {
          v = 0.0;
          clamped = true;
        }
        state.concentrations[j] = v;
      }
    }
    state.t = t_next;
    if (clamped) rec.event(StepEvent::Kind::Clamp, t_next, h);
    if (rec.accept(state)) return;
  }
}

void run_adaptive(const ReactionNetwork& net, const SystemState& state0, double t_end,
                  const IntegrationOptions& opts, Recorder& rec) {
  using R = Rodas3;
  const auto s = static_cast<Eigen::Index>(net.species_count());
  const double abs_tol = resolve_abs_tol(opts, state0);

  SystemState state = state0;
  SystemState work = state0;
  Eigen::VectorXd y = as_eigen(state0.concentrations);
  double h = std::min({opts.dt_init, opts.dt_max, t_end - state0.t});
  std::size_t attempts = 0;

  const auto f = [&](const Eigen::VectorXd& at) {
    work.concentrations.assign(at.data(), at.data() + at.size());
    return as_eigen(derivative(net, work));
  };

  while (state.t < t_end) {
    if (++attempts > opts.max_steps) {
      throw Error(ErrorKind::MaxStepsExceeded,
                  "adaptive integration exceeded " + std::to_string(opts.max_steps) +
                      " step attempts at t=" + std::to_string(state.t));
    }
    bool last = false;
    if (h >= t_end - state.t) {
      h = t_end - state.t;
      last = true;
    }
    if (h < opts.dt_min || state.t + h == state.t) {
      throw Error(ErrorKind::StepUnderflow,
                  "step size fell below dt_min at t=" + std::to_string(state.t));
    }

    const auto jac_values = jacobian(net, state);
    const Eigen::MatrixXd jac =
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            jac_values.data(), s, s);
    const Eigen::MatrixXd lhs =
        Eigen::MatrixXd::Identity(s, s) / (h * R::gamma) - jac;
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(lhs);

    Eigen::VectorXd k[R::stages];
    for (int i = 0; i < R::stages; ++i) {
      Eigen::VectorXd stage = y;
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(s);
      for (int j = 0; j < i; ++j) {
        if (R::a[i][j] != 0.0) stage += R::a[i][j] * k[j];
        if (R::c[i][j] != 0.0) rhs += (R::c[i][j] / h) * k[j];
      }
      rhs += f(stage);
      k[i] = lu.solve(rhs);
    }
    Eigen::VectorXd y_new = y;
    Eigen::VectorXd err = Eigen::VectorXd::Zero(s);
    for (int i = 0; i < R::stages; ++i) {
      if (R::m[i] != 0.0) y_new += R::m[i] * k[i];
      if (R::e[i] != 0.0) err += R::e[i] * k[i];
    }

    double err_norm = 0.0;
    bool negative = false;
    bool clip = false;
    for (Eigen::Index i = 0; i < s; ++i) {
      const double scale = std::max(opts.rel_tol * std::max(std::abs(y[i]), std::abs(y_new[i])), abs_tol);
      err_norm = std::max(err_norm, std::abs(err[i]) / scale);
      if (y_new[i] < -abs_tol) negative = true;
      if (y_new[i] < 0.0) clip = true;
    }
    if (!std::isfinite(err_norm)) err_norm = std::numeric_limits<double>::infinity();

    if (err_norm <= 1.0 && !negative) {
      if (clip) {
        y_new = y_new.cwiseMax(0.0);
        rec.event(StepEvent::Kind::Clamp, state.t + h, h);
      }
      y = y_new;
      state.t = last ? t_end : state.t + h;
      state.concentrations = as_std(y);
      if (rec.accept(state)) return;
      const double grow = err_norm == 0.0 ? 5.0 : 0.9 * std::pow(err_norm, -1.0 / R::order);
      h = std::min(opts.dt_max, h * std::clamp(grow, 0.2, 5.0));
    } else {
      rec.event(StepEvent::Kind::Reject, state.t, h);
      if (negative || !std::isfinite(err_norm)) {
        h *= 0.5;
      } else {
        h *= std::clamp(0.9 * std::pow(err_norm, -1.0 / R::order), 0.2, 0.5);
      }
    }
  }
}

Trajectory run(const ReactionNetwork& net, const SystemState& state0, double t_end,
               const IntegrationOptions& opts, const StopFn* stop) {
  check_state(net, state0);
  validate(opts);
  if (!(t_end >= state0.t)) {
    throw Error(ErrorKind::InvalidOptions, "t_end must not precede the initial time");
  }
  for (const double n : state0.concentrations) {
    if (!(n >= 0.0)) throw Error(ErrorKind::InvalidValue, "initial concentrations must be >= 0");
  }
  Recorder rec(net, stop);
  if (rec.accept(state0) || t_end == state0.t) return std::move(rec.traj);
  if (opts.method == Method::AdaptiveStiff) {
    run_adaptive(net, state0, t_end, opts, rec);
  } else {
    run_fixed(net, state0, t_end, opts, rec);
  }
  return std::move(rec.traj);
}

}  // namespace

std::vector<double> Trajectory::times() const {
  std::vector<double> out;
  out.reserve(states.size());
  for (const auto& s : states) out.push_back(s.t);
  return out;
}

std::vector<double> Trajectory::series(std::size_t species) const {
  std::vector<double> out;
  out.reserve(states.size());
  for (const auto& s : states) out.push_back(s.concentrations.at(species));
  return out;
}

std::vector<double> Trajectory::derivative_series(std::size_t species) const {
  std::vector<double> out;
  out.reserve(derivatives.size());
  for (const auto& d : derivatives) out.push_back(d.at(species));
  return out;
}

void Trajectory::push(SystemState state, std::vector<double> dndt) {
  states.push_back(std::move(state));
  derivatives.push_back(std::move(dndt));
}

double resolve_abs_tol(const IntegrationOptions& opts, const SystemState& state0) {
  if (opts.abs_tol) return *opts.abs_tol;
  double peak = 0.0;
  for (const double n : state0.concentrations) peak = std::max(peak, std::abs(n));
  return std::max(1e-12 * peak, std::numeric_limits<double>::min());
}

void validate(const IntegrationOptions& opts) {
  const auto fail = [](const std::string& what) { throw Error(ErrorKind::InvalidOptions, what); };
  if (!(opts.dt_min > 0.0)) fail("dt_min must be > 0");
  if (!(opts.dt_min <= opts.dt_init)) fail("dt_min must not exceed dt_init");
  if (!(opts.dt_min <= opts.dt_max)) fail("dt_min must not exceed dt_max");
  if (!(opts.rel_tol > 0.0)) fail("rel_tol must be > 0");
  if (opts.abs_tol && !(*opts.abs_tol > 0.0)) fail("abs_tol must be > 0");
  if (opts.max_steps == 0) fail("max_steps must be > 0");
}

Trajectory integrate(const ReactionNetwork& net, const SystemState& state0, double t_end,
                     const IntegrationOptions& opts) {
  return run(net, state0, t_end, opts, nullptr);
}

Trajectory integrate_until(const ReactionNetwork& net, const SystemState& state0, double t_end,
                           const IntegrationOptions& opts, const StopFn& stop) {
  return run(net, state0, t_end, opts, &stop);
}

SteadyState steady_state(const ReactionNetwork& net, const SystemState& state0, double tol,
                         double t_cap, const IntegrationOptions& opts) {
  if (!(tol > 0.0)) throw Error(ErrorKind::InvalidOptions, "steady-state tolerance must be > 0");
  const double floor = resolve_abs_tol(opts, state0);
  bool converged = false;
  const StopFn stop = [&](const SystemState& state, std::span<const double> dndt) {
    double rate = 0.0;
    double size = 0.0;
    for (std::size_t i = 0; i < dndt.size(); ++i) {
      rate = std::max(rate, std::abs(dndt[i]));
      size = std::max(size, std::abs(state.concentrations[i]));
    }
    converged = rate / std::max(size, floor) <= tol;
    return converged;
  };
  auto traj = integrate_until(net, state0, t_cap, opts, stop);
  return {traj.back(), converged};
}

std::vector<std::size_t> nearest_steps(const Trajectory& traj, std::span<const double> times) {
  if (traj.empty()) throw Error(ErrorKind::GridMismatch, "empty trajectory");
  const auto grid = traj.times();
  std::vector<std::size_t> out;
  out.reserve(times.size());
  for (const double t : times) {
    const auto it = std::lower_bound(grid.begin(), grid.end(), t);
    std::size_t i = static_cast<std::size_t>(it - grid.begin());
    if (i == grid.size()) {
      i = grid.size() - 1;
    } else if (i > 0 && t - grid[i - 1] <= grid[i] - t) {
      --i;
    }
    out.push_back(i);
  }
  return out;
}

}  // namespace cpn
