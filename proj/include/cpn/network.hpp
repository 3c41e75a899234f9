#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace cpn {

/// A chemical species. An empty composition marks a pseudo-species (photons,
/// valve states, counters) that is excluded from elemental balance checks.
struct Species {
  std::string name;
  std::map<std::string, int> composition;
  std::optional<double> mass_amu;

  bool is_pseudo() const noexcept { return composition.empty(); }
  friend bool operator==(const Species&, const Species&) = default;
};

struct ConstantRate {
  double k = 0.0;
  friend bool operator==(const ConstantRate&, const ConstantRate&) = default;
};

/// k = A exp(-Ea / T), with Ea and T both in eV.
struct ArrheniusRate {
  double A = 0.0;
  double Ea = 0.0;
  friend bool operator==(const ArrheniusRate&, const ArrheniusRate&) = default;
};

using RateModel = std::variant<ConstantRate, ArrheniusRate>;

struct StoichTerm {
  std::size_t species = 0;
  int count = 1;
  friend bool operator==(const StoichTerm&, const StoichTerm&) = default;
};

struct Reaction {
  std::vector<StoichTerm> reactants;
  std::vector<StoichTerm> products;
  RateModel rate = ConstantRate{};
  // Reaction order per reactant species; absent entries use the stoichiometric count.
  std::map<std::size_t, double> order_override;

  double order_of(const StoichTerm& reactant) const;
  friend bool operator==(const Reaction&, const Reaction&) = default;
};

/// How the "mean temperature of the reactants" is formed for Arrhenius rates.
enum class TempMean { Distinct, Stoichiometric };

/// Concentrations (m^-3 by convention) and per-species temperatures (eV) at time t.
struct SystemState {
  double t = 0.0;
  std::vector<double> concentrations;
  std::vector<double> temperatures;

  friend bool operator==(const SystemState&, const SystemState&) = default;
};

/// Species plus reactions, stored column-per-reaction: the product column of
/// reaction j is Phi(:, j), the reactant column Gamma(:, j).
class ReactionNetwork {
 public:
  ReactionNetwork() = default;
  ReactionNetwork(std::vector<Species> species, std::vector<Reaction> reactions,
                  TempMean temp_mean = TempMean::Distinct);

  std::size_t species_count() const noexcept { return species_.size(); }
  std::size_t reaction_count() const noexcept { return reactions_.size(); }

  std::span<const Species> species() const noexcept { return species_; }
  std::span<const Reaction> reactions() const noexcept { return reactions_; }
  const Species& species(std::size_t i) const { return species_.at(i); }
  const Reaction& reaction(std::size_t j) const { return reactions_.at(j); }

  std::optional<std::size_t> find_species(std::string_view name) const;
  std::size_t species_index(std::string_view name) const;  // throws UnknownSpecies

  int phi(std::size_t species, std::size_t reaction) const;
  int gamma(std::size_t species, std::size_t reaction) const;
  int net(std::size_t species, std::size_t reaction) const {
    return phi(species, reaction) - gamma(species, reaction);
  }
  // Nonzero entries of (Phi - Gamma)(:, reaction).
  std::span<const StoichTerm> net_column(std::size_t reaction) const { return net_.at(reaction); }

  TempMean temp_mean() const noexcept { return temp_mean_; }

  ReactionNetwork with_rate(std::size_t reaction, RateModel rate) const;
  ReactionNetwork with_temp_mean(TempMean mean) const;

  friend bool operator==(const ReactionNetwork& a, const ReactionNetwork& b) {
    return a.species_ == b.species_ && a.reactions_ == b.reactions_ && a.temp_mean_ == b.temp_mean_;
  }

 private:
  std::vector<Species> species_;
  std::vector<Reaction> reactions_;
  std::vector<std::vector<StoichTerm>> net_;
  TempMean temp_mean_ = TempMean::Distinct;
};

using RateVector = std::vector<double>;

ReactionNetwork assemble_network(std::vector<Species> species, std::vector<Reaction> reactions);

SystemState make_state(const ReactionNetwork& net, std::vector<double> concentrations,
                       double temperature = 1.0, double t = 0.0);

double arrhenius_k(const RateModel& model, double t_mean);
double reactant_mean_temperature(const Reaction& reaction, const SystemState& state,
                                 TempMean mean = TempMean::Distinct);

RateVector rate_vector(const ReactionNetwork& net, const SystemState& state);
std::vector<double> derivative(const ReactionNetwork& net, const SystemState& state);
std::vector<double> direct_derivative(const ReactionNetwork& net, const SystemState& state);

/// d(dN/dt)/dN, row-major s x s. Non-integer orders at zero concentration
/// contribute a zero partial.
std::vector<double> jacobian(const ReactionNetwork& net, const SystemState& state);

struct EulerStep {
  SystemState state;
  bool clamped = false;
  std::vector<std::size_t> clamped_species;
};

EulerStep euler_step(const ReactionNetwork& net, const SystemState& state, double dt);

struct ElementalResidual {
  std::vector<std::string> elements;
  // residual[e][j]: net change of element e in reaction j.
  std::vector<std::vector<long long>> residual;

  bool balanced() const;
};

/// Pseudo-species contribute nothing; with strict set, any reacting
/// pseudo-species raises MissingComposition instead.
ElementalResidual elemental_residual(const ReactionNetwork& net, bool strict = false);

/// weights^T (Phi - Gamma), one entry per reaction. Zero everywhere means the
/// weighted sum of concentrations is conserved by every reaction.
std::vector<double> invariant_residual(const ReactionNetwork& net, std::span<const double> weights);

/// sum_i composition[i][element] * n_i for every element of elemental_residual().elements.
std::vector<double> elemental_totals(const ReactionNetwork& net, std::span<const double> n);

void check_state(const ReactionNetwork& net, const SystemState& state);

}  // namespace cpn
