#pragma once

#include <random>
#include <string>
#include <vector>

#include "cpn/error.hpp"
#include "cpn/network.hpp"

#define CHECK_KIND(expr, expected_kind)                         \
  do {                                                          \
    bool thrown_ = false;                                       \
    try {                                                       \
      (void)(expr);                                             \
    } catch (const cpn::Error& e_) {                            \
      thrown_ = true;                                           \
      CHECK_MESSAGE(e_.kind() == (expected_kind), e_.what());   \
    }                                                           \
    CHECK_MESSAGE(thrown_, "expected " #expected_kind);         \
  } while (0)

namespace testing {

struct RandomNetworkOptions {
  std::size_t max_species = 10;
  std::size_t max_reactions = 15;
  bool arrhenius = true;
  bool orders = true;
  bool compositions = true;
};

inline cpn::ReactionNetwork random_network(std::mt19937_64& rng, const RandomNetworkOptions& o = {}) {
  std::uniform_int_distribution<std::size_t> ns(1, o.max_species);
  std::uniform_int_distribution<std::size_t> nr(1, o.max_reactions);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t s = ns(rng);
  const std::size_t r = nr(rng);
  std::vector<cpn::Species> species;
  const char* elements[] = {"H", "O", "C", "N"};
  for (std::size_t i = 0; i < s; ++i) {
    cpn::Species sp{"S" + std::to_string(i), {}, std::nullopt};
    if (o.compositions && u(rng) < 0.7) {
      for (const char* e : elements) {
        if (u(rng) < 0.4) sp.composition[e] = 1 + static_cast<int>(u(rng) * 3);
      }
    }
    species.push_back(std::move(sp));
  }
  std::uniform_int_distribution<std::size_t> pick(0, s - 1);
  std::vector<cpn::Reaction> reactions;
  for (std::size_t j = 0; j < r; ++j) {
    cpn::Reaction rx;
    const auto side = [&](std::vector<cpn::StoichTerm>& terms, std::size_t count) {
      std::vector<bool> used(s, false);
      for (std::size_t k = 0; k < count; ++k) {
        const std::size_t i = pick(rng);
        if (used[i]) continue;
        used[i] = true;
        terms.push_back({i, 1 + static_cast<int>(u(rng) * 2.5)});
      }
    };
    side(rx.reactants, 1 + static_cast<std::size_t>(u(rng) * 3));
    side(rx.products, 1 + static_cast<std::size_t>(u(rng) * 3));
    if (o.arrhenius && u(rng) < 0.4) {
      rx.rate = cpn::ArrheniusRate{std::exp(u(rng) * 6 - 3), u(rng) * 3};
    } else {
      rx.rate = cpn::ConstantRate{std::exp(u(rng) * 6 - 3)};
    }
    if (o.orders && u(rng) < 0.3) rx.order_override[rx.reactants.front().species] = 0.5 + u(rng) * 2;
    reactions.push_back(std::move(rx));
  }
  return cpn::ReactionNetwork(std::move(species), std::move(reactions));
}

inline cpn::SystemState random_state(std::mt19937_64& rng, const cpn::ReactionNetwork& net) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  cpn::SystemState st{0.0, {}, {}};
  for (std::size_t i = 0; i < net.species_count(); ++i) {
    st.concentrations.push_back(u(rng) < 0.1 ? 0.0 : std::exp(u(rng) * 8 - 4));
    st.temperatures.push_back(0.2 + u(rng) * 3);
  }
  return st;
}

// Relative difference with a floor so exact zeros compare cleanly.
inline double rel_diff(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / scale;
}

}  // namespace testing
