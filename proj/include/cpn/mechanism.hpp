#pragma once

// Line-based mechanism text format:
//
//   # comment
//   species H2 {H:2}, O {O:1}, H2O {H:2, O:1}, hv
//   H2 + O -> H2O : const(2.5)
//   2 A -> A2 : arrhenius(A=1.0e-13, Ea=15.76) order(A=1.5)
//
// Names match [A-Za-z][A-Za-z0-9_+-]*, so "Ar+", "e-" and "C4F8" are names.
// A '-' directly followed by '>' ends a name, which keeps "A->B" readable.
// Species are declared on first use unless parsing is strict.

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cpn/network.hpp"

namespace cpn {

struct Mechanism {
  std::vector<Species> species;
  std::vector<Reaction> reactions;
  // 1-based source line of each reaction.
  std::vector<std::size_t> reaction_lines;

  ReactionNetwork network(TempMean mean = TempMean::Distinct) const;
};

struct ParseOptions {
  // Require every species to be declared before use, and at most once.
  bool strict = false;
};

/// Throws ParseError carrying the line and column of the first problem.
Mechanism parse_network(std::string_view text, const ParseOptions& opts = {});

std::string serialize_network(std::span<const Species> species, std::span<const Reaction> reactions);
std::string serialize_network(const ReactionNetwork& net);

/// Canonical number text: six decimals when that reproduces the value
/// exactly, otherwise the shortest round-trip representation.
std::string format_number(double value);

/// Deletes every line that mentions `name` as a whole token.
std::string remove_species_lines(std::string_view text, std::string_view name);

Mechanism load_mechanism(const std::string& path, const ParseOptions& opts = {});

}  // namespace cpn
