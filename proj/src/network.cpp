#include "cpn/network.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

#include "cpn/error.hpp"

namespace cpn {

namespace {

bool is_integral(double x) { return std::floor(x) == x && std::abs(x) < 64.0; }

// n^order, exact repeated multiplication for small integral orders.
double power(double n, double order) {
  if (order == 0.0) return 1.0;
  if (is_integral(order) && order > 0.0) {
    double out = n;
    for (int i = 1; i < static_cast<int>(order); ++i) out *= n;
    return out;
  }
  return std::pow(std::max(n, 0.0), order);
}

void validate_rate(const RateModel& rate, std::size_t j) {
  const auto bad = [j](const char* what) {
    throw Error(ErrorKind::InvalidValue,
                "reaction " + std::to_string(j) + ": " + what + " must be finite and >= 0");
  };
  if (const auto* c = std::get_if<ConstantRate>(&rate)) {
    if (!std::isfinite(c->k) || c->k < 0.0) bad("rate constant k");
  } else {
    const auto& a = std::get<ArrheniusRate>(rate);
    if (!std::isfinite(a.A) || a.A < 0.0) bad("pre-exponential A");
    if (!std::isfinite(a.Ea) || a.Ea < 0.0) bad("activation energy Ea");
  }
}

std::vector<StoichTerm> merge_terms(const std::vector<StoichTerm>& terms) {
  std::vector<StoichTerm> out;
  for (const auto& term : terms) {
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const StoichTerm& t) { return t.species == term.species; });
    if (it == out.end()) {
      out.push_back(term);
    } else {
      it->count += term.count;
    }
  }
  return out;
}

int count_in(const std::vector<StoichTerm>& terms, std::size_t species) {
  for (const auto& t : terms) {
    if (t.species == species) return t.count;
  }
  return 0;
}

// k * prod n^order for one reaction; the single place rate contributions are formed.
double contribution(const Reaction& r, const SystemState& state, TempMean mean) {
  const double t_mean = reactant_mean_temperature(r, state, mean);
  double value = arrhenius_k(r.rate, t_mean);
  for (const auto& term : r.reactants) {
    value *= power(state.concentrations[term.species], r.order_of(term));
  }
  return value;
}

}  // namespace

double Reaction::order_of(const StoichTerm& reactant) const {
  const auto it = order_override.find(reactant.species);
  return it == order_override.end() ? static_cast<double>(reactant.count) : it->second;
}

ReactionNetwork::ReactionNetwork(std::vector<Species> species, std::vector<Reaction> reactions,
                                 TempMean temp_mean)
    : species_(std::move(species)), reactions_(std::move(reactions)), temp_mean_(temp_mean) {
  std::unordered_set<std::string> names;
  for (const auto& sp : species_) {
    if (sp.name.empty()) throw Error(ErrorKind::InvalidValue, "species name must not be empty");
    if (!names.insert(sp.name).second) {
      throw Error(ErrorKind::DuplicateSpecies, "duplicate species '" + sp.name + "'");
    }
    for (const auto& [element, count] : sp.composition) {
      if (count < 0) {
        throw Error(ErrorKind::InvalidValue,
                    "species '" + sp.name + "': negative count for element " + element);
      }
    }
  }

  const std::size_t s = species_.size();
  net_.reserve(reactions_.size());
  for (std::size_t j = 0; j < reactions_.size(); ++j) {
    auto& r = reactions_[j];
    if (r.reactants.empty()) {
      throw Error(ErrorKind::InvalidReaction,
                  "reaction " + std::to_string(j) + " has no reactants");
    }
    for (const auto* side : {&r.reactants, &r.products}) {
      for (const auto& term : *side) {
        if (term.species >= s) {
          throw Error(ErrorKind::UnknownSpeciesIndex,
                      "reaction " + std::to_string(j) + " references species index " +
                          std::to_string(term.species) + " (network has " + std::to_string(s) +
                          ")");
        }
        if (term.count < 1) {
          throw Error(ErrorKind::InvalidReaction, "reaction " + std::to_string(j) +
                                                      ": stoichiometric counts must be >= 1");
        }
      }
    }
    r.reactants = merge_terms(r.reactants);
    r.products = merge_terms(r.products);
    validate_rate(r.rate, j);
    for (const auto& [sp, order] : r.order_override) {
      if (count_in(r.reactants, sp) == 0) {
        throw Error(ErrorKind::InvalidReaction, "reaction " + std::to_string(j) +
                                                    ": order override for non-reactant species");
      }
      if (!std::isfinite(order) || order < 0.0) {
        throw Error(ErrorKind::InvalidValue,
                    "reaction " + std::to_string(j) + ": reaction order must be >= 0");
      }
    }

    std::vector<StoichTerm> column;
    std::set<std::size_t> involved;
    for (const auto& t : r.reactants) involved.insert(t.species);
    for (const auto& t : r.products) involved.insert(t.species);
    for (const auto sp : involved) {
      const int d = count_in(r.products, sp) - count_in(r.reactants, sp);
      if (d != 0) column.push_back({sp, d});
    }
    net_.push_back(std::move(column));
  }
}

std::optional<std::size_t> ReactionNetwork::find_species(std::string_view name) const {
  for (std::size_t i = 0; i < species_.size(); ++i) {
    if (species_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t ReactionNetwork::species_index(std::string_view name) const {
  if (auto i = find_species(name)) return *i;
  throw Error(ErrorKind::UnknownSpecies, "unknown species '" + std::string(name) + "'");
}

int ReactionNetwork::phi(std::size_t species, std::size_t reaction) const {
  return count_in(reactions_.at(reaction).products, species);
}

int ReactionNetwork::gamma(std::size_t species, std::size_t reaction) const {
  return count_in(reactions_.at(reaction).reactants, species);
}

ReactionNetwork ReactionNetwork::with_rate(std::size_t reaction, RateModel rate) const {
  auto reactions = reactions_;
  reactions.at(reaction).rate = rate;
  return ReactionNetwork(species_, std::move(reactions), temp_mean_);
}

ReactionNetwork ReactionNetwork::with_temp_mean(TempMean mean) const {
  ReactionNetwork out = *this;
  out.temp_mean_ = mean;
  return out;
}

ReactionNetwork assemble_network(std::vector<Species> species, std::vector<Reaction> reactions) {
  return ReactionNetwork(std::move(species), std::move(reactions));
}

SystemState make_state(const ReactionNetwork& net, std::vector<double> concentrations,
                       double temperature, double t) {
  SystemState state{t, std::move(concentrations),
                    std::vector<double>(net.species_count(), temperature)};
  check_state(net, state);
  return state;
}

void check_state(const ReactionNetwork& net, const SystemState& state) {
  const std::size_t s = net.species_count();
  if (state.concentrations.size() != s || state.temperatures.size() != s) {
    throw Error(ErrorKind::DimensionMismatch,
                "state has " + std::to_string(state.concentrations.size()) + " concentrations and " +
                    std::to_string(state.temperatures.size()) + " temperatures, network has " +
                    std::to_string(s) + " species");
  }
}

double arrhenius_k(const RateModel& model, double t_mean) {
  if (!(t_mean > 0.0)) {
    throw Error(ErrorKind::NonPositiveTemperature, "mean reactant temperature must be > 0");
  }
  if (const auto* c = std::get_if<ConstantRate>(&model)) return c->k;
  const auto& a = std::get<ArrheniusRate>(model);
  if (a.Ea == 0.0) return a.A;
  return a.A * std::exp(-a.Ea / t_mean);
}

double reactant_mean_temperature(const Reaction& reaction, const SystemState& state,
                                 TempMean mean) {
  double sum = 0.0;
  double weight = 0.0;
  for (const auto& term : reaction.reactants) {
    const double w = mean == TempMean::Distinct ? 1.0 : static_cast<double>(term.count);
    sum += w * state.temperatures.at(term.species);
    weight += w;
  }
  if (weight == 0.0) throw Error(ErrorKind::InvalidReaction, "reaction has no reactants");
  return sum / weight;
}

RateVector rate_vector(const ReactionNetwork& net, const SystemState& state) {
  check_state(net, state);
  RateVector k(net.reaction_count());
  for (std::size_t j = 0; j < k.size(); ++j) {
    k[j] = contribution(net.reaction(j), state, net.temp_mean());
  }
  return k;
}

std::vector<double> derivative(const ReactionNetwork& net, const SystemState& state) {
  const RateVector k = rate_vector(net, state);
  std::vector<double> dndt(net.species_count(), 0.0);
  for (std::size_t j = 0; j < k.size(); ++j) {
    for (const auto& entry : net.net_column(j)) {
      dndt[entry.species] += entry.count * k[j];
    }
  }
  return dndt;
}

std::vector<double> direct_derivative(const ReactionNetwork& net, const SystemState& state) {
  check_state(net, state);
  const auto reactions = net.reactions();
  std::vector<double> dndt(net.species_count(), 0.0);
  for (std::size_t i = 0; i < dndt.size(); ++i) {
    double sum = 0.0;
    for (const auto& r : reactions) {
      const int produced = count_in(r.products, i);
      const int consumed = count_in(r.reactants, i);
      if (produced == consumed) continue;
      sum += (produced - consumed) * contribution(r, state, net.temp_mean());
    }
    dndt[i] = sum;
  }
  return dndt;
}

std::vector<double> jacobian(const ReactionNetwork& net, const SystemState& state) {
  check_state(net, state);
  const std::size_t s = net.species_count();
  std::vector<double> jac(s * s, 0.0);
  for (std::size_t j = 0; j < net.reaction_count(); ++j) {
    const auto& r = net.reaction(j);
    const double k = arrhenius_k(r.rate, reactant_mean_temperature(r, state, net.temp_mean()));
    for (const auto& wrt : r.reactants) {
      const double order = r.order_of(wrt);
      if (order == 0.0) continue;
      const double n = state.concentrations[wrt.species];
      if (n <= 0.0 && order < 1.0) continue;
      double partial = k * order * (order == 1.0 ? 1.0 : power(n, order - 1.0));
      for (const auto& other : r.reactants) {
        if (other.species != wrt.species) {
          partial *= power(state.concentrations[other.species], r.order_of(other));
        }
      }
      for (const auto& entry : net.net_column(j)) {
        jac[entry.species * s + wrt.species] += entry.count * partial;
      }
    }
  }
  return jac;
}

EulerStep euler_step(const ReactionNetwork& net, const SystemState& state, double dt) {
  if (!(dt > 0.0)) throw Error(ErrorKind::NonPositiveDt, "time step must be > 0");
  const auto dndt = derivative(net, state);
  EulerStep out{state, false, {}};
  out.state.t = state.t + dt;
  for (std::size_t i = 0; i < dndt.size(); ++i) {
    double n = state.concentrations[i] + dndt[i] * dt;
    if (n < 0.0) {
      n = 0.0;
      out.clamped = true;
      out.clamped_species.push_back(i);
    }
    out.state.concentrations[i] = n;
  }
  return out;
}

bool ElementalResidual::balanced() const {
  for (const auto& row : residual) {
    for (const auto v : row) {
      if (v != 0) return false;
    }
  }
  return true;
}

ElementalResidual elemental_residual(const ReactionNetwork& net, bool strict) {
  std::set<std::string> elements;
  for (const auto& sp : net.species()) {
    for (const auto& [element, count] : sp.composition) elements.insert(element);
  }
  ElementalResidual out;
  out.elements.assign(elements.begin(), elements.end());
  out.residual.assign(out.elements.size(), std::vector<long long>(net.reaction_count(), 0));

  for (std::size_t j = 0; j < net.reaction_count(); ++j) {
    for (const auto& entry : net.net_column(j)) {
      const auto& sp = net.species(entry.species);
      if (sp.is_pseudo()) {
        if (strict) {
          throw Error(ErrorKind::MissingComposition,
                      "species '" + sp.name + "' in reaction " + std::to_string(j) +
                          " has no elemental composition");
        }
        continue;
      }
      for (std::size_t e = 0; e < out.elements.size(); ++e) {
        const auto it = sp.composition.find(out.elements[e]);
        if (it != sp.composition.end()) {
          out.residual[e][j] += static_cast<long long>(it->second) * entry.count;
        }
      }
    }
  }
  return out;
}

std::vector<double> invariant_residual(const ReactionNetwork& net, std::span<const double> weights) {
  if (weights.size() != net.species_count()) {
    throw Error(ErrorKind::DimensionMismatch, "weight vector length differs from species count");
  }
  std::vector<double> out(net.reaction_count(), 0.0);
  for (std::size_t j = 0; j < out.size(); ++j) {
    for (const auto& entry : net.net_column(j)) out[j] += weights[entry.species] * entry.count;
  }
  return out;
}

std::vector<double> elemental_totals(const ReactionNetwork& net, std::span<const double> n) {
  if (n.size() != net.species_count()) {
    throw Error(ErrorKind::DimensionMismatch, "concentration vector length differs from species count");
  }
  std::set<std::string> elements;
  for (const auto& sp : net.species()) {
    for (const auto& [element, count] : sp.composition) elements.insert(element);
  }
  std::vector<double> totals;
  for (const auto& element : elements) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n.size(); ++i) {
      const auto& comp = net.species(i).composition;
      if (auto it = comp.find(element); it != comp.end()) sum += it->second * n[i];
    }
    totals.push_back(sum);
  }
  return totals;
}

}  // namespace cpn
