#include "cpn/fit.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>
#include <random>

#include "cpn/error.hpp"

namespace cpn::fit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct StartResult {
  std::vector<double> x;  // log coefficients
  double loss = kInf;
  std::size_t evaluations = 0;
  bool converged = false;
  std::vector<double> accepted;
};

class Objective {
 public:
  explicit Objective(const FitProblem& p) : p_(p), times_(p.target.times()) {}

  // Failed simulations count as an evaluation with infinite loss.
  double operator()(const std::vector<double>& x) const {
    std::vector<double> k(x.size());
    std::transform(x.begin(), x.end(), k.begin(), [](double v) { return std::exp(v); });
    try {
      const auto net = with_parameters(p_.network, p_.parameters, k);
      const auto traj = sample_trajectory(net, p_.initial, times_, p_.integration);
      const double loss = trajectory_loss(traj, p_.target, p_.species, p_.weights);
      return std::isfinite(loss) ? loss : kInf;
    } catch (const Error&) {
      return kInf;
    }
  }

 private:
  const FitProblem& p_;
  std::vector<double> times_;
};

// Nelder-Mead on a box in log space. The best vertex after each iteration is
// the accepted iterate, so its loss never increases.
StartResult nelder_mead(const Objective& f, std::vector<double> x0, double f0, const std::vector<double>& lo,
                        const std::vector<double>& hi, std::size_t budget, double x_tol, double f_tol) {
  const std::size_t n = x0.size();
  const auto clamp = [&](std::vector<double> x) {
    for (std::size_t i = 0; i < n; ++i) x[i] = std::clamp(x[i], lo[i], hi[i]);
    return x;
  };
  StartResult r;
  r.x = x0;
  r.loss = f0;
  r.accepted.push_back(f0);

  std::vector<std::vector<double>> simplex{x0};
  std::vector<double> values{f0};
  for (std::size_t i = 0; i < n && r.evaluations < budget; ++i) {
    auto v = x0;
    const double step = std::min(0.5, 0.1 * (hi[i] - lo[i]));
    v[i] = v[i] + step <= hi[i] ? v[i] + step : v[i] - step;
    v = clamp(v);
    simplex.push_back(v);
    values.push_back(f(v));
    ++r.evaluations;
  }
  if (simplex.size() < n + 1) return r;

  std::vector<std::size_t> order(n + 1);
  const auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<std::vector<double>> s;
    std::vector<double> v;
    for (const auto i : order) {
      s.push_back(simplex[i]);
      v.push_back(values[i]);
    }
    simplex = std::move(s);
    values = std::move(v);
  };
  const auto accept_best = [&] {
    if (values[0] < r.loss) {
      r.loss = values[0];
      r.x = simplex[0];
    }
    r.accepted.push_back(r.loss);
  };

  sort_simplex();
  accept_best();
  while (r.evaluations < budget) {
    double size = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
      for (std::size_t d = 0; d < n; ++d) size = std::max(size, std::abs(simplex[i][d] - simplex[0][d]));
    }
    const double spread = values[n] - values[0];
    if (size <= x_tol || (std::isfinite(spread) && spread <= f_tol * (std::abs(values[0]) + 1e-300))) {
      r.converged = true;
      break;
    }

    std::vector<double> centroid(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t d = 0; d < n; ++d) centroid[d] += simplex[i][d] / static_cast<double>(n);
    }
    const auto along = [&](double t) {
      std::vector<double> x(n);
      for (std::size_t d = 0; d < n; ++d) x[d] = centroid[d] + t * (simplex[n][d] - centroid[d]);
      return clamp(x);
    };

    const auto xr = along(-1.0);
    const double fr = f(xr);
    ++r.evaluations;
    if (fr < values[0]) {
      if (r.evaluations < budget) {
        const auto xe = along(-2.0);
        const double fe = f(xe);
        ++r.evaluations;
        if (fe < fr) {
          simplex[n] = xe;
          values[n] = fe;
        } else {
          simplex[n] = xr;
          values[n] = fr;
        }
      } else {
        simplex[n] = xr;
        values[n] = fr;
      }
    } else if (fr < values[n - 1]) {
      simplex[n] = xr;
      values[n] = fr;
    } else {
      const bool outside = fr < values[n];
      const auto xc = along(outside ? -0.5 : 0.5);
      if (r.evaluations >= budget) break;
      const double fc = f(xc);
      ++r.evaluations;
      if (fc < (outside ? fr : values[n])) {
        simplex[n] = xc;
        values[n] = fc;
      } else {
        for (std::size_t i = 1; i <= n && r.evaluations < budget; ++i) {
          for (std::size_t d = 0; d < n; ++d) simplex[i][d] = simplex[0][d] + 0.5 * (simplex[i][d] - simplex[0][d]);
          values[i] = f(simplex[i]);
          ++r.evaluations;
        }
      }
    }
    sort_simplex();
    accept_best();
  }
  return r;
}

}  // namespace

void FitProblem::validate() const {
  if (parameters.empty()) throw Error(ErrorKind::InvalidProblem, "no free parameters");
  if (species.empty()) throw Error(ErrorKind::InvalidProblem, "no species selected for the loss");
  if (target.empty()) throw Error(ErrorKind::InvalidProblem, "empty target trajectory");
  if (!weights.empty() && weights.size() != species.size()) {
    throw Error(ErrorKind::InvalidProblem, "one weight per selected species required");
  }
  for (const double w : weights) {
    if (!std::isfinite(w) || w < 0.0) throw Error(ErrorKind::InvalidProblem, "weights must be finite and >= 0");
  }
  for (const auto s : species) {
    if (s >= network.species_count()) throw Error(ErrorKind::UnknownSpeciesIndex, "selected species out of range");
  }
  for (const auto& fp : parameters) {
    if (fp.reaction >= network.reaction_count()) {
      throw Error(ErrorKind::InvalidProblem, "free parameter refers to a missing reaction");
    }
    if (!(fp.lower > 0.0) || !(fp.upper > fp.lower) || !std::isfinite(fp.upper)) {
      throw Error(ErrorKind::InvalidProblem, "parameter bounds need 0 < lower < upper");
    }
  }
  if (!initial_guess.empty() && initial_guess.size() != parameters.size()) {
    throw Error(ErrorKind::InvalidProblem, "initial guess size does not match the free parameters");
  }
  if (starts == 0) throw Error(ErrorKind::InvalidProblem, "need at least one start");
  check_state(network, initial);
  for (const auto& s : target.states) {
    if (s.concentrations.size() != network.species_count()) {
      throw Error(ErrorKind::DimensionMismatch, "target state size does not match the network");
    }
  }
}

double trajectory_loss(const Trajectory& candidate, const Trajectory& target, std::span<const std::size_t> species,
                       std::span<const double> weights) {
  if (species.empty()) throw Error(ErrorKind::InvalidProblem, "no species selected for the loss");
  if (!weights.empty() && weights.size() != species.size()) {
    throw Error(ErrorKind::InvalidProblem, "one weight per selected species required");
  }
  if (target.empty()) return 0.0;
  const auto t_target = target.times();
  const auto t_cand = candidate.times();
  const auto idx = nearest_steps(candidate, t_target);
  const double span = std::max({t_target.back() - t_target.front(), std::abs(t_target.back()), 1e-300});
  double loss = 0.0;
  for (std::size_t i = 0; i < t_target.size(); ++i) {
    if (std::abs(t_cand[idx[i]] - t_target[i]) > 1e-6 * span) {
      throw Error(ErrorKind::GridMismatch, "candidate has no step near t = " + std::to_string(t_target[i]));
    }
    const auto& a = candidate.states[idx[i]].concentrations;
    const auto& b = target.states[i].concentrations;
    for (std::size_t s = 0; s < species.size(); ++s) {
      if (species[s] >= a.size() || species[s] >= b.size()) {
        throw Error(ErrorKind::UnknownSpeciesIndex, "selected species out of range");
      }
      const double d = a[species[s]] - b[species[s]];
      loss += (weights.empty() ? 1.0 : weights[s]) * d * d;
    }
  }
  return loss;
}

Trajectory sample_trajectory(const ReactionNetwork& net, const SystemState& initial, std::span<const double> times,
                             const IntegrationOptions& opts) {
  check_state(net, initial);
  IntegrationOptions o = opts;
  o.abs_tol = resolve_abs_tol(opts, initial);
  Trajectory out;
  SystemState s = initial;
  for (const double t : times) {
    if (t < s.t) throw Error(ErrorKind::GridMismatch, "sample times must be non-decreasing from the initial time");
    if (t > s.t) {
      const auto seg = integrate(net, s, t, o);
      s = seg.back();
      s.t = t;
    }
    out.push(s, derivative(net, s));
  }
  return out;
}

ReactionNetwork with_parameters(const ReactionNetwork& net, std::span<const FreeParameter> params,
                                std::span<const double> values) {
  if (params.size() != values.size()) throw Error(ErrorKind::InvalidProblem, "parameter count mismatch");
  ReactionNetwork out = net;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& rate = out.reaction(params[i].reaction).rate;
    RateModel updated = rate;
    if (std::holds_alternative<ConstantRate>(rate)) {
      updated = ConstantRate{values[i]};
    } else {
      updated = ArrheniusRate{values[i], std::get<ArrheniusRate>(rate).Ea};
    }
    out = out.with_rate(params[i].reaction, updated);
  }
  return out;
}

std::vector<double> current_parameters(const ReactionNetwork& net, std::span<const FreeParameter> params) {
  std::vector<double> out;
  for (const auto& fp : params) {
    const auto& rate = net.reaction(fp.reaction).rate;
    out.push_back(std::holds_alternative<ConstantRate>(rate) ? std::get<ConstantRate>(rate).k
                                                             : std::get<ArrheniusRate>(rate).A);
  }
  return out;
}

FitResult fit_rates(const FitProblem& problem) {
  problem.validate();
  const std::size_t n = problem.parameters.size();
  std::vector<double> lo(n), hi(n);
  for (std::size_t i = 0; i < n; ++i) {
    lo[i] = std::log(problem.parameters[i].lower);
    hi[i] = std::log(problem.parameters[i].upper);
  }
  auto k0 = problem.initial_guess.empty() ? current_parameters(problem.network, problem.parameters)
                                          : problem.initial_guess;
  std::vector<double> x0(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(k0[i] > 0.0)) throw Error(ErrorKind::InvalidProblem, "initial coefficients must be > 0");
    x0[i] = std::log(k0[i]);
    if (x0[i] < lo[i] || x0[i] > hi[i]) {
      x0[i] = std::clamp(x0[i], lo[i], hi[i]);
      k0[i] = std::exp(x0[i]);
    }
  }

  const Objective f(problem);
  const double f0 = f(x0);
  if (!std::isfinite(f0)) throw Error(ErrorKind::SimulationFailure, "simulation fails at the initial parameters");

  // Start 0 is the initial guess; the rest sit on a Latin grid over the log box.
  std::vector<std::vector<double>> starts{x0};
  const std::size_t extra = problem.starts - 1;
  if (extra > 0) {
    std::mt19937 rng(problem.seed);
    std::vector<std::vector<std::size_t>> perms(n);
    for (auto& p : perms) {
      p.resize(extra);
      std::iota(p.begin(), p.end(), 0);
      std::shuffle(p.begin(), p.end(), rng);
    }
    for (std::size_t s = 0; s < extra; ++s) {
      std::vector<double> x(n);
      for (std::size_t d = 0; d < n; ++d) {
        x[d] = lo[d] + (static_cast<double>(perms[d][s]) + 0.5) / static_cast<double>(extra) * (hi[d] - lo[d]);
      }
      starts.push_back(std::move(x));
    }
  }

  const std::size_t per_start = problem.max_evaluations / problem.starts;
  std::size_t first_budget = problem.max_evaluations - per_start * (problem.starts - 1);

  const auto run_start = [&](std::size_t s) {
    if (s == 0) return nelder_mead(f, x0, f0, lo, hi, first_budget, problem.x_tol, problem.f_tol);
    if (per_start == 0) return StartResult{starts[s], kInf, 0, false, {}};
    const double fs = f(starts[s]);
    auto r = nelder_mead(f, starts[s], fs, lo, hi, per_start - 1, problem.x_tol, problem.f_tol);
    r.evaluations += 1;
    return r;
  };

  std::vector<StartResult> results(starts.size());
  const std::size_t jobs = std::max<std::size_t>(1, problem.jobs);
  for (std::size_t begin = 0; begin < starts.size(); begin += jobs) {
    std::vector<std::future<StartResult>> batch;
    const std::size_t end = std::min(starts.size(), begin + jobs);
    for (std::size_t s = begin; s < end; ++s) {
      batch.push_back(std::async(jobs > 1 ? std::launch::async : std::launch::deferred, run_start, s));
    }
    for (std::size_t s = begin; s < end; ++s) results[s] = batch[s - begin].get();
  }

  FitResult out;
  out.initial_loss = f0;
  std::size_t best = 0;
  for (std::size_t s = 0; s < results.size(); ++s) {
    out.evaluations += results[s].evaluations;
    if (results[s].loss < results[best].loss) best = s;
    out.accepted_losses.push_back(results[s].accepted);
  }
  out.best_start = best;
  out.loss = results[best].loss;
  out.converged = results[best].converged;
  out.budget_exhausted = out.evaluations >= problem.max_evaluations && !out.converged;
  for (const double x : results[best].x) out.parameters.push_back(std::exp(x));
  if (results[best].x == x0) out.parameters = k0;  // keep the caller's exact values
  return out;
}

}  // namespace cpn::fit
