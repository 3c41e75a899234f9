#pragma once

// Nanotube tweezer rotors driven by an incident wave, guest release, and the
// guest-seeded plasma chemistry whose electron density is read out as a
// plasma frequency.

#include <cstddef>
#include <string>
#include <vector>

#include "cpn/integrator.hpp"
#include "cpn/network.hpp"

namespace cpn::signal {

struct PhysConstants {
  double e = 1.602176634e-19;          // C
  double m_e = 9.1093837015e-31;       // kg
  double epsilon = 8.8541878128e-12;   // F/m
  double c = 299792458.0;              // m/s

  void validate() const;
};

inline constexpr double kAmu = 1.66053906660e-27;  // kg

/// E(t) = E0 sin(2 pi f t + phase), polarized along `polarization` (rad) in the rotor plane.
struct EMWave {
  double E0 = 0.0;
  double frequency = 1.0;
  double polarization = 0.0;
  double phase = 0.0;

  void validate() const;
  double field(double t) const;
  double wavenumber(const PhysConstants& k = {}) const { return frequency / k.c; }
};

struct PointCharge {
  double q = 0.0;    // C
  double r = 0.0;    // m from the rotation axis
  double phi = 0.0;  // body-frame angle, rad
};

struct PointMass {
  double m = 0.0;  // kg
  double r = 0.0;  // m
};

/// Planar rigid rotor. `masses` includes everything that turns with the rotor
/// (the guest too, if it should count toward the moment of inertia).
struct TweezerModel {
  std::vector<PointCharge> charges;
  std::vector<PointMass> masses;
  double guest_mass = 0.0;    // kg
  double guest_radius = 0.0;  // m
  double length = 0.0;        // m
  double phi0 = 0.0;          // initial orientation, rad
  double omega0 = 0.0;        // initial angular velocity, rad/s

  void validate() const;
  double moment_of_inertia() const;
};

enum class ForceForm {
  Acceleration,  // F_g = m_g r_g |d omega/dt|
  Literal,       // F_g = m_g r_g |omega| (momentum units, kept for comparison)
};

struct RotationResult {
  std::vector<double> t;
  std::vector<double> phi;    // absolute orientation phi0 + phi(t)
  std::vector<double> omega;
  std::vector<double> force;  // |F_g| at each sample
  double peak_force = 0.0;
};

RotationResult simulate_rotation(const TweezerModel& model, const EMWave& wave, double duration,
                                 std::size_t steps_per_period, ForceForm form = ForceForm::Acceleration);

/// Bond energy in eV over gap in m, in newtons.
double escape_threshold(double bond_energy_ev, double gap, const PhysConstants& k = {});

struct GuestCount {
  double length = 0.0;
  long long count = 0;
};

struct TweezerPopulation {
  std::vector<TweezerModel> models;       // strictly increasing length
  std::vector<GuestCount> guest_count_map;
  double F_bc = 0.0;

  void validate() const;
  long long guest_count(double length) const;  // UnmappedLength if absent
};

/// Window and resolution used for every rotor of a population.
struct DriveWindow {
  double duration = 0.0;  // <= 0: `periods` periods of the wave
  double periods = 10.0;
  std::size_t steps_per_period = 200;
  ForceForm form = ForceForm::Acceleration;

  double resolve(const EMWave& wave) const;
};

std::vector<double> peak_forces(const TweezerPopulation& pop, const EMWave& wave, const DriveWindow& window = {});
std::vector<double> released_lengths(const TweezerPopulation& pop, const EMWave& wave,
                                     const DriveWindow& window = {});
long long released_guest_count(const TweezerPopulation& pop, const EMWave& wave,
                               const DriveWindow& window = {});
long long guest_count_sum(const TweezerPopulation& pop, const std::vector<double>& lengths);

/// Defaults of the built-in rotor family.
struct PopulationSpec {
  std::size_t count = 32;
  double length_min = 5e-9;
  double length_max = 5e-7;
  double tip_charge = 0.1 * 1.602176634e-19;  // +q and -q at the two tips
  double linear_density = 3.248e-15;          // kg/m, uniform rod
  std::size_t rod_segments = 64;
  double guest_mass = 78.11 * kAmu;           // held at r = L/2
  double hub_mass = 1e6 * kAmu;               // length-independent inertia
  double hub_radius = 3.2e-9;
  double phi0 = 1.5707963267948966;
  double omega0 = 0.0;
  double count_scale = 1.0;                   // n_g(L) = round(scale * L / L_1)
  double bond_energy_ev = 0.43;
  double gap = 3.4e-10;

  TweezerModel model(double length) const;
  TweezerPopulation build() const;
};

struct SignalChemParams {
  double k2 = 2e-15;  // e + g -> i_g + 2e
  double k3 = 1e-13;  // e + i_g -> g
  double k4 = 1e-16;  // e + gas -> i_gas + 2e
  double k5 = 1e-13;  // e + i_gas -> gas
  double n_gas = 1e22;
  double n_e = 1e15;
  double n_i_g = 0.0;
  double n_i_gas = 1e15;
  double n_g = 0.0;
  // Guest density added per released molecule count.
  double density_per_guest = 1e16;

  void validate() const;
};

/// Species order: e, g, i_g, gas, i_gas.
enum SignalSpecies : std::size_t { Electron, Guest, GuestIon, Gas, GasIon, kSignalCount };

ReactionNetwork build_signal_network(const SignalChemParams& p);
SystemState signal_initial_state(const SignalChemParams& p);

/// Charge weights (-1 for electrons, +1 for ions) for invariant_residual().
std::vector<double> charge_weights();

inline constexpr const char* kRegimeNote =
    "k4*n_gas >> k5*n_g; checked as guest minority with low ionization degree";

struct MinorityRegimeCheck {
  std::vector<double> t;
  std::vector<double> lhs;  // n_g
  std::vector<double> rhs;  // offset + int k4 n_e n_gas - int k5 n_e^2 - n_e
  double max_abs_error = 0.0;
  // max |lhs - rhs| over max |int k5 n_e^2 dt|, the term the approximation rewrites.
  double max_rel_error = 0.0;
  // max |lhs - rhs| over max |lhs|.
  double rel_to_lhs = 0.0;
  double max_ionization_degree = 0.0;
  double guest_fraction = 0.0;
  std::string regime = kRegimeNote;
};

MinorityRegimeCheck eq19_check(const Trajectory& traj, const SignalChemParams& p);

double plasma_frequency(double n_e, const PhysConstants& k = {});

struct ResponseOptions {
  double settle = 1e-3;        // s, cap for the steady-state search
  double steady_tol = 1e-10;
  IntegrationOptions integration{};
  DriveWindow window{};
};

struct Response {
  long long released = 0;
  double n_g_initial = 0.0;
  double n_e = 0.0;
  double omega_p = 0.0;
  bool converged = false;
};

Response respond(const TweezerPopulation& pop, const SignalChemParams& p, const EMWave& wave,
                 const ResponseOptions& opts = {}, const PhysConstants& k = {});

/// Steady state of the chemistry with `released` guests added.
Response respond_to_count(long long released, const SignalChemParams& p, const ResponseOptions& opts = {},
                          const PhysConstants& k = {});

}  // namespace cpn::signal
