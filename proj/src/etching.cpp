#include "cpn/etching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "cpn/error.hpp"

namespace cpn::etch {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Reaction make(std::vector<StoichTerm> reactants, std::vector<StoichTerm> products, double k) {
  return Reaction{std::move(reactants), std::move(products), ConstantRate{k}, {}};
}

// (signed coefficient, rate constant, sorted reactant multiset)
using Term = std::tuple<int, double, std::vector<std::size_t>>;

std::vector<Term> terms_for(const ReactionNetwork& net, std::size_t species) {
  std::vector<Term> out;
  for (std::size_t j = 0; j < net.reaction_count(); ++j) {
    const int coeff = net.net(species, j);
    if (coeff == 0) continue;
    const auto& r = net.reaction(j);
    std::vector<std::size_t> reactants;
    for (const auto& t : r.reactants) {
      // The source pseudo-species stays at 1 and only carries the zeroth-order rate.
      if (t.species == Source) continue;
      for (int c = 0; c < t.count; ++c) reactants.push_back(t.species);
    }
    std::sort(reactants.begin(), reactants.end());
    out.emplace_back(coeff, std::get<ConstantRate>(r.rate).k, std::move(reactants));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string describe(const std::vector<Term>& terms) {
  std::ostringstream os;
  for (const auto& [c, k, reactants] : terms) {
    os << (c > 0 ? " +" : " ") << c << "*" << k;
    for (const auto i : reactants) os << "*n_" << kSpeciesNames[i];
  }
  return os.str();
}

}  // namespace

void EtchParams::validate() const {
  const double values[] = {k1, k2, k3, k4, k5, k6, k7, ion_source, n_ion, n_s, n_p,
                           n_ex, n_hv, n_C4F8, n_op, n_DNP, n_TTF};
  for (const double v : values) {
    if (!std::isfinite(v) || v < 0.0) {
      throw Error(ErrorKind::InvalidValue, "etch parameters must be finite and >= 0");
    }
  }
}

ReactionNetwork build_etch_network(const EtchParams& params) {
  params.validate();
  std::vector<cpn::Species> species;
  for (const char* name : kSpeciesNames) species.push_back({name, {}, std::nullopt});

  std::vector<Reaction> reactions;
  reactions.push_back(make({{Ion, 1}, {Substrate, 1}}, {{Product, 1}}, params.k1));
  reactions.push_back(make({{Ion, 1}, {Product, 1}}, {{Excited, 1}}, params.k2));
  reactions.push_back(make({{Excited, 1}}, {{Photon, 1}, {Product, 1}}, params.k3));
  reactions.push_back(make({{Dnp, 1}, {Photon, 1}}, {{Ttf, 1}, {C4F8, 1}}, params.k4));
  reactions.push_back(make({{Ion, 1}, {C4F8, 1}}, {{Other, 1}}, params.k5));
  reactions.push_back(make({{Ttf, 1}}, {{Dnp, 1}}, params.k6));
  reactions.push_back(make({{Photon, 1}}, {{PhotonLost, 1}}, params.k7));
  reactions.push_back(make({{Source, 1}}, {{Source, 1}, {Ion, 1}}, params.ion_source));
  return ReactionNetwork(std::move(species), std::move(reactions));
}

SystemState initial_state(const EtchParams& params) {
  params.validate();
  std::vector<double> n(kCount, 0.0);
  n[Ion] = params.n_ion;
  n[Substrate] = params.n_s;
  n[Product] = params.n_p;
  n[Excited] = params.n_ex;
  n[Photon] = params.n_hv;
  n[C4F8] = params.n_C4F8;
  n[Other] = params.n_op;
  n[Dnp] = params.n_DNP;
  n[Ttf] = params.n_TTF;
  n[Source] = 1.0;
  return SystemState{0.0, std::move(n), std::vector<double>(kCount, 1.0)};
}

namespace {

using Side = std::map<std::string, int>;

Side side_of(const ReactionNetwork& net, const std::vector<StoichTerm>& terms) {
  Side out;
  for (const auto& t : terms) out[net.species()[t.species].name] += t.count;
  return out;
}

double* rate_slot(EtchParams& p, std::size_t j) {
  double* slots[] = {&p.k1, &p.k2, &p.k3, &p.k4, &p.k5, &p.k6, &p.k7, &p.ion_source};
  return slots[j];
}

}  // namespace

EtchParams params_from_network(const ReactionNetwork& net, EtchParams base) {
  const auto canonical = build_etch_network(base);
  std::vector<bool> seen(canonical.reaction_count(), false);
  for (std::size_t j = 0; j < canonical.reaction_count(); ++j) *rate_slot(base, j) = 0.0;
  for (const auto& r : net.reactions()) {
    const auto reactants = side_of(net, r.reactants);
    const auto products = side_of(net, r.products);
    bool matched = false;
    for (std::size_t j = 0; j < canonical.reaction_count() && !matched; ++j) {
      const auto& c = canonical.reaction(j);
      if (side_of(canonical, c.reactants) != reactants || side_of(canonical, c.products) != products) continue;
      if (!std::holds_alternative<ConstantRate>(r.rate) || !r.order_override.empty()) {
        throw Error(ErrorKind::InvalidReaction, "etch reactions need constant rates and default orders");
      }
      if (seen[j]) throw Error(ErrorKind::InvalidReaction, "etch reaction listed twice");
      seen[j] = true;
      matched = true;
      *rate_slot(base, j) = std::get<ConstantRate>(r.rate).k;
    }
    if (!matched) throw Error(ErrorKind::InvalidReaction, "reaction is not part of the etch network");
  }
  return base;
}

std::vector<std::string> check_rate_equations(const ReactionNetwork& net, const EtchParams& p) {
  using V = std::vector<std::size_t>;
  std::map<std::size_t, std::vector<Term>> expected;
  expected[Product] = {{1, p.k1, V{Ion, Substrate}}, {-1, p.k2, V{Ion, Product}}, {1, p.k3, V{Excited}}};
  expected[C4F8] = {{1, p.k4, V{Photon, Dnp}}, {-1, p.k5, V{Ion, C4F8}}};
  expected[Ion] = {{-1, p.k1, V{Ion, Substrate}}, {-1, p.k2, V{Ion, Product}},
                   {-1, p.k5, V{Ion, C4F8}}, {1, p.ion_source, V{}}};

  std::vector<std::string> mismatches;
  for (auto& [species, terms] : expected) {
    for (auto& term : terms) std::sort(std::get<2>(term).begin(), std::get<2>(term).end());
    std::sort(terms.begin(), terms.end());
    const auto actual = terms_for(net, species);
    if (actual != terms) {
      mismatches.push_back(std::string("d n_") + kSpeciesNames[species] + "/dt: expected" +
                           describe(terms) + ", network has" + describe(actual));
    }
  }
  return mismatches;
}

PhotonRatio photon_ratio(const SystemState& state, const EtchParams& params) {
  const auto& n = state.concentrations;
  if (n.size() != kCount) throw Error(ErrorKind::DimensionMismatch, "not an etch network state");
  const double generation = params.k3 * n[Excited];
  if (!(generation > 0.0)) {
    throw Error(ErrorKind::ZeroGenerationRate, "photon generation rate k3*n_ex is zero");
  }
  const double value = params.k4 * n[Dnp] * n[Photon] / generation;
  return {value, value >= 1.0};
}

std::vector<double> centered_difference(std::span<const double> t, std::span<const double> values) {
  const std::size_t n = t.size();
  if (n < 3 || values.size() != n) {
    throw Error(ErrorKind::InsufficientPoints, "centered differences need at least 3 samples");
  }
  std::vector<double> out(n);
  out.front() = (values[1] - values[0]) / (t[1] - t[0]);
  out.back() = (values[n - 1] - values[n - 2]) / (t[n - 1] - t[n - 2]);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h1 = t[i] - t[i - 1];
    const double h2 = t[i + 1] - t[i];
    out[i] = (h1 * h1 * values[i + 1] - h2 * h2 * values[i - 1] + (h2 * h2 - h1 * h1) * values[i]) /
             (h1 * h2 * (h1 + h2));
  }
  return out;
}

EtchDiagnostics derivation_residuals(const Trajectory& traj, const EtchParams& p) {
  const std::size_t n = traj.size();
  if (n < 3) throw Error(ErrorKind::InsufficientPoints, "etch diagnostics need at least 3 samples");
  if (traj.states.front().concentrations.size() != kCount) {
    throw Error(ErrorKind::DimensionMismatch, "trajectory does not come from the etch network");
  }

  EtchDiagnostics d;
  d.t = traj.times();
  std::vector<double> inner(n);
  double max_dc = 0.0;
  double max_eq7 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& x = traj.states[i].concentrations;
    const auto& dx = traj.derivatives[i];
    inner[i] = dx[Ion] / (p.k5 * x[Ion]) + p.k1 / p.k5 * x[Substrate];
    max_dc = std::max(max_dc, std::abs(dx[C4F8]));
  }
  const auto inner_rate = centered_difference(d.t, inner);

  for (std::size_t i = 0; i < n; ++i) {
    const auto& x = traj.states[i].concentrations;
    const auto& dx = traj.derivatives[i];
    const double generation = p.k3 * x[Excited];
    const double rp = generation > 0.0 ? p.k4 * x[Dnp] * x[Photon] / generation : kNaN;
    if (std::isnan(rp)) ++d.undefined_points;

    const double eq7 = dx[C4F8] - (rp * dx[Product] + rp * p.k2 * x[Ion] * x[Product] -
                                   rp * p.k1 * x[Ion] * x[Substrate] - p.k5 * x[Ion] * x[C4F8]);
    const double phi = -inner_rate[i] - dx[Ion] - (rp - 1.0) * p.k1 * x[Ion] * x[Substrate];
    const double psi = rp - p.k2 / p.k5;
    const double omega = (rp - 1.0) * p.k2 * x[Ion];
    const double eq9 = phi - (psi * dx[Product] + omega * x[Product]);

    d.photon_ratio.push_back(rp);
    d.eq7_residual.push_back(eq7);
    d.phi.push_back(phi);
    d.psi.push_back(psi);
    d.omega.push_back(omega);
    d.eq9_residual.push_back(eq9);
    d.eq10_predicted_rate.push_back(-phi * omega / (psi * psi));
    d.dp_dt.push_back(dx[Product]);
    if (!std::isnan(eq7)) max_eq7 = std::max(max_eq7, std::abs(eq7));
    if (std::isfinite(eq9)) d.eq9_max_abs = std::max(d.eq9_max_abs, std::abs(eq9));
  }
  d.eq7_max_normalized = max_dc > 0.0 ? max_eq7 / max_dc : max_eq7;
  d.crossing_abs_tol = kCrossingFloor * max_dc;
  d.zero_crossing_count = count_sign_changes(traj.derivative_series(C4F8), d.crossing_abs_tol);
  return d;
}

std::size_t c4f8_crossings(const Trajectory& traj) {
  if (traj.empty() || traj.derivatives.front().size() != kCount) {
    throw Error(ErrorKind::DimensionMismatch, "trajectory does not come from the etch network");
  }
  const auto rate = traj.derivative_series(C4F8);
  double peak = 0.0;
  for (const double v : rate) peak = std::max(peak, std::abs(v));
  return count_sign_changes(rate, kCrossingFloor * peak);
}

std::size_t count_sign_changes(std::span<const double> series, double abs_tol) {
  std::size_t changes = 0;
  int previous = 0;
  for (const double v : series) {
    if (!(std::abs(v) > abs_tol)) continue;
    const int sign = v > 0.0 ? 1 : -1;
    if (previous != 0 && sign != previous) ++changes;
    previous = sign;
  }
  return changes;
}

std::size_t detect_oscillation(const ReactionNetwork& net, const Trajectory& traj,
                               std::string_view species, double abs_tol) {
  const std::size_t idx = net.species_index(species);
  if (traj.size() < 2) throw Error(ErrorKind::InsufficientPoints, "need at least 2 samples");
  return count_sign_changes(traj.derivative_series(idx), abs_tol);
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw Error(ErrorKind::InsufficientPoints, "correlation needs two equal-length series");
  }
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return kNaN;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace cpn::etch
