#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cpn/integrator.hpp"
#include "cpn/network.hpp"

namespace cpn::etch {

/// Species order of the network built by build_etch_network().
/// `src` is a catalytic pseudo-species carrying the ion source and `hv_esc`
/// counts photons lost from the plasma.
enum Species : std::size_t { Ion, Substrate, Product, Excited, Photon, C4F8, Other, Dnp, Ttf, Source, PhotonLost, kCount };

inline constexpr const char* kSpeciesNames[kCount] = {"ion", "s", "p", "ex", "hv", "C4F8",
                                                      "op", "DNP", "TTF", "src", "hv_esc"};

struct EtchParams {
  double k1 = 1.0;     // ion + s -> p
  double k2 = 0.015;   // ion + p -> ex
  double k3 = 2.0;     // ex -> hv + p
  double k4 = 4.0;     // DNP + hv -> TTF + C4F8
  double k5 = 170.0;   // ion + C4F8 -> op
  double k6 = 0.003;   // TTF -> DNP (valve re-arm)
  double k7 = 0.17;    // hv -> hv_esc (photon escape)
  double ion_source = 0.55;

  double n_ion = 2.25;
  double n_s = 44.0;
  double n_p = 0.0;
  double n_ex = 0.0;
  double n_hv = 0.0;
  double n_C4F8 = 0.0;
  double n_op = 0.0;
  double n_DNP = 0.58;
  double n_TTF = 0.0;

  void validate() const;
};

ReactionNetwork build_etch_network(const EtchParams& params);
SystemState initial_state(const EtchParams& params);

/// Rate constants of `net`, matched to the etch reactions by species names and
/// stoichiometry, written over the rates in `base`. Etch reactions missing from
/// `net` get rate 0; reactions that are not etch reactions raise InvalidReaction.
EtchParams params_from_network(const ReactionNetwork& net, EtchParams base = {});

/// Term-by-term comparison of the network's rate expressions for p, C4F8 and
/// ion against the hand-written rate equations. Empty when they agree.
std::vector<std::string> check_rate_equations(const ReactionNetwork& net, const EtchParams& params);

struct PhotonRatio {
  double value = 0.0;
  bool warning = false;  // value >= 1
};

/// Photon absorption rate over generation rate, k4 n_DNP n_hv / (k3 n_ex).
PhotonRatio photon_ratio(const SystemState& state, const EtchParams& params);

struct EtchDiagnostics {
  std::vector<double> t;
  std::vector<double> photon_ratio;  // NaN where k3 n_ex == 0
  std::vector<double> phi;
  std::vector<double> psi;
  std::vector<double> omega;
  std::vector<double> eq7_residual;
  std::vector<double> eq9_residual;
  std::vector<double> eq10_predicted_rate;
  std::vector<double> dp_dt;  // stored derivative of n_p, shown next to eq10
  double eq7_max_normalized = 0.0;  // max |eq7 residual| / max |d n_C4F8 / dt|
  double eq9_max_abs = 0.0;
  std::size_t undefined_points = 0;  // samples where the photon ratio is undefined
  std::size_t zero_crossing_count = 0;
  double crossing_abs_tol = 0.0;  // samples below this are not counted
};

/// Relative noise floor for crossing counts: samples with
/// |d n/dt| <= floor * max |d n/dt| are skipped.
inline constexpr double kCrossingFloor = 1e-3;

EtchDiagnostics derivation_residuals(const Trajectory& traj, const EtchParams& params);

/// Sign changes of d n_C4F8/dt above kCrossingFloor.
std::size_t c4f8_crossings(const Trajectory& traj);

/// Strict sign changes between consecutive samples whose magnitude exceeds
/// abs_tol; smaller samples are skipped.
std::size_t count_sign_changes(std::span<const double> series, double abs_tol = 0.0);

std::size_t detect_oscillation(const ReactionNetwork& net, const Trajectory& traj,
                               std::string_view species, double abs_tol = 0.0);

double pearson(std::span<const double> a, std::span<const double> b);

/// Derivative of `values` on a non-uniform grid: three-point centered in the
/// interior, one-sided at the ends.
std::vector<double> centered_difference(std::span<const double> t, std::span<const double> values);

}  // namespace cpn::etch
