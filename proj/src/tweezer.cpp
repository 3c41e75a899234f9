#include "cpn/tweezer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "cpn/error.hpp"

namespace cpn::signal {

namespace {

void require(bool ok, ErrorKind kind, const char* message) {
  if (!ok) throw Error(kind, message);
}

bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

// Sum_i q_i r_i sin(theta_i) with theta_i = phi_i + phi + phi0 - polarization.
double dipole_sine(const TweezerModel& m, double phi, double polarization) {
  double s = 0.0;
  for (const auto& c : m.charges) s += c.q * c.r * std::sin(c.phi + phi + m.phi0 - polarization);
  return s;
}

}  // namespace

void PhysConstants::validate() const {
  for (const double v : {e, m_e, epsilon, c}) {
    require(std::isfinite(v) && v > 0.0, ErrorKind::InvalidValue, "physical constants must be > 0");
  }
}

void EMWave::validate() const {
  require(finite_nonneg(E0), ErrorKind::InvalidValue, "wave amplitude must be >= 0");
  require(std::isfinite(frequency) && frequency > 0.0, ErrorKind::InvalidValue, "wave frequency must be > 0");
  require(std::isfinite(polarization) && std::isfinite(phase), ErrorKind::InvalidValue,
          "wave angles must be finite");
}

double EMWave::field(double t) const {
  return E0 * std::sin(2.0 * std::numbers::pi * frequency * t + phase);
}

void TweezerModel::validate() const {
  for (const auto& c : charges) {
    require(std::isfinite(c.q) && std::isfinite(c.phi), ErrorKind::InvalidValue, "charges must be finite");
    require(finite_nonneg(c.r), ErrorKind::InvalidValue, "charge radii must be >= 0");
  }
  for (const auto& m : masses) {
    require(finite_nonneg(m.m) && finite_nonneg(m.r), ErrorKind::InvalidValue, "masses and radii must be >= 0");
  }
  require(finite_nonneg(guest_mass) && finite_nonneg(guest_radius), ErrorKind::InvalidValue,
          "guest mass and radius must be >= 0");
  require(std::isfinite(phi0) && std::isfinite(omega0), ErrorKind::InvalidValue, "initial angle and rate must be finite");
  require(moment_of_inertia() > 0.0, ErrorKind::ZeroMomentOfInertia, "rotor has zero moment of inertia");
}

double TweezerModel::moment_of_inertia() const {
  double I = 0.0;
  for (const auto& m : masses) I += m.m * m.r * m.r;
  return I;
}

RotationResult simulate_rotation(const TweezerModel& model, const EMWave& wave, double duration,
                                 std::size_t steps_per_period, ForceForm form) {
  model.validate();
  wave.validate();
  require(std::isfinite(duration) && duration > 0.0, ErrorKind::InvalidValue, "duration must be > 0");
  require(steps_per_period >= 50, ErrorKind::InvalidValue, "need at least 50 steps per period");

  const double inertia = model.moment_of_inertia();
  const auto accel = [&](double t, double phi) {
    return -wave.field(t) * dipole_sine(model, phi, wave.polarization) / inertia;
  };
  const auto force = [&](double t, double phi, double omega) {
    const double a = form == ForceForm::Acceleration ? accel(t, phi) : omega;
    return model.guest_mass * model.guest_radius * std::abs(a);
  };

  const auto n = static_cast<std::size_t>(
      std::max(1.0, std::ceil(duration * wave.frequency * static_cast<double>(steps_per_period) - 1e-9)));
  const double h = duration / static_cast<double>(n);

  RotationResult out;
  out.t.reserve(n + 1);
  out.phi.reserve(n + 1);
  out.omega.reserve(n + 1);
  out.force.reserve(n + 1);

  double phi = 0.0;
  double omega = model.omega0;
  const auto record = [&](double t) {
    out.t.push_back(t);
    out.phi.push_back(model.phi0 + phi);
    out.omega.push_back(omega);
    out.force.push_back(force(t, phi, omega));
    out.peak_force = std::max(out.peak_force, out.force.back());
  };
  record(0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = h * static_cast<double>(i);
    const double a1 = accel(t, phi);
    const double v1 = omega;
    const double a2 = accel(t + h / 2, phi + h / 2 * v1);
    const double v2 = omega + h / 2 * a1;
    const double a3 = accel(t + h / 2, phi + h / 2 * v2);
    const double v3 = omega + h / 2 * a2;
    const double a4 = accel(t + h, phi + h * v3);
    const double v4 = omega + h * a3;
    phi += h / 6 * (v1 + 2 * v2 + 2 * v3 + v4);
    omega += h / 6 * (a1 + 2 * a2 + 2 * a3 + a4);
    record(h * static_cast<double>(i + 1));
  }
  return out;
}

double escape_threshold(double bond_energy_ev, double gap, const PhysConstants& k) {
  require(std::isfinite(gap) && gap > 0.0, ErrorKind::NonPositiveGap, "gap distance must be > 0");
  require(finite_nonneg(bond_energy_ev), ErrorKind::InvalidValue, "bond energy must be >= 0");
  return bond_energy_ev * k.e / gap;
}

void TweezerPopulation::validate() const {
  require(!models.empty(), ErrorKind::InvalidValue, "tweezer population is empty");
  for (std::size_t i = 1; i < models.size(); ++i) {
    require(models[i].length > models[i - 1].length, ErrorKind::InvalidValue,
            "tweezer lengths must be strictly increasing");
  }
  for (const auto& g : guest_count_map) {
    require(g.count >= 0, ErrorKind::InvalidValue, "guest counts must be >= 0");
  }
  require(finite_nonneg(F_bc), ErrorKind::InvalidValue, "escape force must be >= 0");
}

long long TweezerPopulation::guest_count(double length) const {
  for (const auto& g : guest_count_map) {
    if (std::abs(g.length - length) <= 1e-9 * std::max(std::abs(g.length), std::abs(length))) return g.count;
  }
  throw Error(ErrorKind::UnmappedLength, "no guest count mapped for length " + std::to_string(length));
}

double DriveWindow::resolve(const EMWave& wave) const {
  if (duration > 0.0) return duration;
  require(std::isfinite(periods) && periods > 0.0, ErrorKind::InvalidValue, "drive window must be > 0");
  return periods / wave.frequency;
}

std::vector<double> peak_forces(const TweezerPopulation& pop, const EMWave& wave, const DriveWindow& window) {
  pop.validate();
  wave.validate();
  const double duration = window.resolve(wave);
  std::vector<double> peaks;
  peaks.reserve(pop.models.size());
  for (const auto& m : pop.models) {
    peaks.push_back(simulate_rotation(m, wave, duration, window.steps_per_period, window.form).peak_force);
  }
  return peaks;
}

std::vector<double> released_lengths(const TweezerPopulation& pop, const EMWave& wave, const DriveWindow& window) {
  const auto peaks = peak_forces(pop, wave, window);
  std::vector<double> out;
  for (std::size_t i = 0; i < peaks.size(); ++i) {
    if (peaks[i] > 0.0 && peaks[i] >= pop.F_bc) out.push_back(pop.models[i].length);
  }
  return out;
}

long long guest_count_sum(const TweezerPopulation& pop, const std::vector<double>& lengths) {
  long long total = 0;
  for (const double L : lengths) total += pop.guest_count(L);
  return total;
}

long long released_guest_count(const TweezerPopulation& pop, const EMWave& wave, const DriveWindow& window) {
  return guest_count_sum(pop, released_lengths(pop, wave, window));
}

TweezerModel PopulationSpec::model(double length) const {
  require(std::isfinite(length) && length > 0.0, ErrorKind::InvalidValue, "tweezer length must be > 0");
  require(rod_segments > 0, ErrorKind::InvalidValue, "rod needs at least one segment");
  TweezerModel m;
  m.length = length;
  m.phi0 = phi0;
  m.omega0 = omega0;
  m.charges = {{tip_charge, length / 2, 0.0}, {-tip_charge, length / 2, std::numbers::pi}};
  const double seg = length / static_cast<double>(rod_segments);
  for (std::size_t i = 0; i < rod_segments; ++i) {
    const double x = -length / 2 + (static_cast<double>(i) + 0.5) * seg;
    m.masses.push_back({linear_density * seg, std::abs(x)});
  }
  m.masses.push_back({guest_mass, length / 2});
  if (hub_mass > 0.0) m.masses.push_back({hub_mass, hub_radius});
  m.guest_mass = guest_mass;
  m.guest_radius = length / 2;
  return m;
}

TweezerPopulation PopulationSpec::build() const {
  require(count >= 1, ErrorKind::InvalidValue, "population needs at least one length");
  require(length_min > 0.0 && (count == 1 || length_max > length_min), ErrorKind::InvalidValue,
          "length range must be positive and increasing");
  TweezerPopulation pop;
  const double ratio = count > 1 ? std::pow(length_max / length_min, 1.0 / static_cast<double>(count - 1)) : 1.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double L = i + 1 == count && count > 1 ? length_max : length_min * std::pow(ratio, static_cast<double>(i));
    pop.models.push_back(model(L));
    pop.guest_count_map.push_back({L, std::llround(count_scale * L / length_min)});
  }
  pop.F_bc = escape_threshold(bond_energy_ev, gap);
  return pop;
}

void SignalChemParams::validate() const {
  for (const double v : {k2, k3, k4, k5, n_gas, n_e, n_i_g, n_i_gas, n_g, density_per_guest}) {
    require(finite_nonneg(v), ErrorKind::InvalidValue, "signal chemistry parameters must be finite and >= 0");
  }
}

ReactionNetwork build_signal_network(const SignalChemParams& p) {
  p.validate();
  std::vector<cpn::Species> species;
  for (const char* name : {"e", "g", "i_g", "gas", "i_gas"}) species.push_back({name, {}, std::nullopt});
  const auto rx = [](std::vector<StoichTerm> r, std::vector<StoichTerm> q, double k) {
    return Reaction{std::move(r), std::move(q), ConstantRate{k}, {}};
  };
  std::vector<Reaction> reactions;
  reactions.push_back(rx({{Electron, 1}, {Guest, 1}}, {{GuestIon, 1}, {Electron, 2}}, p.k2));
  reactions.push_back(rx({{Electron, 1}, {GuestIon, 1}}, {{Guest, 1}}, p.k3));
  reactions.push_back(rx({{Electron, 1}, {Gas, 1}}, {{GasIon, 1}, {Electron, 2}}, p.k4));
  reactions.push_back(rx({{Electron, 1}, {GasIon, 1}}, {{Gas, 1}}, p.k5));
  return ReactionNetwork(std::move(species), std::move(reactions));
}

SystemState signal_initial_state(const SignalChemParams& p) {
  p.validate();
  return SystemState{0.0, {p.n_e, p.n_g, p.n_i_g, p.n_gas, p.n_i_gas}, std::vector<double>(kSignalCount, 1.0)};
}

std::vector<double> charge_weights() { return {-1.0, 0.0, 1.0, 0.0, 1.0}; }

MinorityRegimeCheck eq19_check(const Trajectory& traj, const SignalChemParams& p) {
  const std::size_t n = traj.size();
  require(n >= 2, ErrorKind::InsufficientPoints, "the integral check needs at least 2 samples");
  require(traj.states.front().concentrations.size() == kSignalCount, ErrorKind::DimensionMismatch,
          "trajectory does not come from the signal network");

  MinorityRegimeCheck r;
  r.t = traj.times();
  const auto& x0 = traj.states.front().concentrations;
  const double offset = x0[Guest] + x0[Electron];
  r.guest_fraction = x0[Gas] > 0.0 ? x0[Guest] / x0[Gas] : 0.0;

  double ionize = 0.0;
  double recombine = 0.0;
  double max_recombine = 0.0;
  double max_lhs = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& x = traj.states[i].concentrations;
    if (i > 0) {
      const auto& xp = traj.states[i - 1].concentrations;
      const double dt = r.t[i] - r.t[i - 1];
      ionize += 0.5 * dt * p.k4 * (xp[Electron] * xp[Gas] + x[Electron] * x[Gas]);
      recombine += 0.5 * dt * p.k5 * (xp[Electron] * xp[Electron] + x[Electron] * x[Electron]);
    }
    r.lhs.push_back(x[Guest]);
    r.rhs.push_back(offset + ionize - recombine - x[Electron]);
    const double err = std::abs(r.lhs.back() - r.rhs.back());
    r.max_abs_error = std::max(r.max_abs_error, err);
    max_recombine = std::max(max_recombine, std::abs(recombine));
    max_lhs = std::max(max_lhs, std::abs(x[Guest]));
    const double neutrals = x[Guest] + x[Gas];
    if (neutrals > 0.0) r.max_ionization_degree = std::max(r.max_ionization_degree, x[Electron] / neutrals);
  }
  if (r.max_abs_error > 0.0) {
    r.max_rel_error = max_recombine > 0.0 ? r.max_abs_error / max_recombine : std::numeric_limits<double>::infinity();
    r.rel_to_lhs = max_lhs > 0.0 ? r.max_abs_error / max_lhs : std::numeric_limits<double>::infinity();
  }
  return r;
}

double plasma_frequency(double n_e, const PhysConstants& k) {
  k.validate();
  require(finite_nonneg(n_e), ErrorKind::InvalidValue, "electron density must be >= 0");
  return std::sqrt(n_e * k.e * k.e / (k.epsilon * k.m_e));
}

Response respond_to_count(long long released, const SignalChemParams& p, const ResponseOptions& opts,
                          const PhysConstants& k) {
  require(released >= 0, ErrorKind::InvalidValue, "released count must be >= 0");
  SignalChemParams q = p;
  q.n_g += static_cast<double>(released) * p.density_per_guest;
  const auto net = build_signal_network(q);
  const auto steady = steady_state(net, signal_initial_state(q), opts.steady_tol, opts.settle, opts.integration);
  Response r;
  r.released = released;
  r.n_g_initial = q.n_g;
  r.n_e = steady.state.concentrations[Electron];
  r.omega_p = plasma_frequency(r.n_e, k);
  r.converged = steady.converged;
  return r;
}

Response respond(const TweezerPopulation& pop, const SignalChemParams& p, const EMWave& wave,
                 const ResponseOptions& opts, const PhysConstants& k) {
  return respond_to_count(released_guest_count(pop, wave, opts.window), p, opts, k);
}

}  // namespace cpn::signal
