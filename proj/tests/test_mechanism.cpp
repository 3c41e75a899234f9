#include <doctest.h>

#include <random>

#include "cpn/mechanism.hpp"
#include "support.hpp"

using namespace cpn;

namespace {

// Parse and report the error position, or (0, 0) if the text is accepted.
std::pair<std::size_t, std::size_t> error_at(std::string_view text, ErrorKind expected) {
  try {
    parse_network(text);
  } catch (const ParseError& e) {
    CHECK_MESSAGE(e.kind() == expected, e.what());
    return {e.line(), e.column()};
  }
  return {0, 0};
}

}  // namespace

TEST_CASE("basic reactions") {
  const auto m = parse_network("A + B -> C : const(2.0)");
  REQUIRE(m.reactions.size() == 1);
  REQUIRE(m.species.size() == 3);
  const auto& r = m.reactions[0];
  CHECK(r.reactants == std::vector<StoichTerm>{{0, 1}, {1, 1}});
  CHECK(r.products == std::vector<StoichTerm>{{2, 1}});
  CHECK(std::get<ConstantRate>(r.rate).k == 2.0);
  CHECK(m.reaction_lines == std::vector<std::size_t>{1});

  const auto a = parse_network("2 A -> A2 : arrhenius(A=1.0e-13, Ea=15.76)");
  REQUIRE(a.reactions.size() == 1);
  CHECK(a.reactions[0].reactants == std::vector<StoichTerm>{{0, 2}});
  const auto& rate = std::get<ArrheniusRate>(a.reactions[0].rate);
  CHECK(rate.A == 1.0e-13);
  CHECK(rate.Ea == 15.76);
}

TEST_CASE("names, comments and declarations") {
  const auto m = parse_network(
      "# etch fragment\n"
      "\n"
      "species C4F8 {C:4, F:8}, Ar, Ar+ , e-\n"
      "  e- + Ar -> Ar+ + 2 e-   : const(1e-3)   # ionization\n"
      "Ar+ + e-->Ar:const(+5)\n"
      "C4F8 + hv -> C4F8 : const(0) order(C4F8=0.5, hv=1.5)\n");
  REQUIRE(m.species.size() == 5);
  CHECK(m.species[0].name == "C4F8");
  CHECK(m.species[0].composition == std::map<std::string, int>{{"C", 4}, {"F", 8}});
  CHECK(m.species[2].name == "Ar+");
  CHECK(m.species[3].name == "e-");
  CHECK(m.species[4].name == "hv");
  CHECK(m.species[4].composition.empty());
  REQUIRE(m.reactions.size() == 3);
  CHECK(m.reactions[0].products == std::vector<StoichTerm>{{2, 1}, {3, 2}});
  CHECK(m.reactions[1].reactants == std::vector<StoichTerm>{{2, 1}, {3, 1}});
  CHECK(std::get<ConstantRate>(m.reactions[1].rate).k == 5.0);
  CHECK(m.reactions[2].order_override == std::map<std::size_t, double>{{0, 0.5}, {4, 1.5}});
  CHECK(m.reaction_lines == std::vector<std::size_t>{4, 5, 6});

  // Repeated terms on one side accumulate.
  const auto rep = parse_network("A + A -> B : const(1)");
  CHECK(rep.reactions[0].reactants == std::vector<StoichTerm>{{0, 2}});
}

TEST_CASE("diagnostics carry line and column") {
  CHECK(error_at("A + -> B : const(1)", ErrorKind::SyntaxError) == std::pair<std::size_t, std::size_t>{1, 3});
  CHECK(error_at("\n\nA -> B : exp(1)", ErrorKind::UnknownRateForm) == std::pair<std::size_t, std::size_t>{3, 10});
  CHECK(error_at("1.5 A -> B : const(1)", ErrorKind::NonIntegerCount) == std::pair<std::size_t, std::size_t>{1, 1});
  CHECK(error_at("A -> 0 B : const(1)", ErrorKind::NonIntegerCount) == std::pair<std::size_t, std::size_t>{1, 6});
  CHECK(error_at("A -> B : const(-1)", ErrorKind::InvalidValue).first == 1);
  CHECK(error_at("A -> B : const(1e400)", ErrorKind::SyntaxError).first == 1);
  CHECK(error_at("A -> B", ErrorKind::SyntaxError) == std::pair<std::size_t, std::size_t>{1, 7});
  CHECK(error_at("A -> B : const(1) order(B=1)", ErrorKind::UnknownSpecies).first == 1);
  CHECK(error_at("A -> B : const(1) extra", ErrorKind::SyntaxError).first == 1);
  CHECK(error_at("species 3X", ErrorKind::SyntaxError).first == 1);
  CHECK(error_at("species X {H:2, H:1}", ErrorKind::SyntaxError).first == 1);
  CHECK(error_at("species X {H:2}, X {O:1}", ErrorKind::DuplicateSpecies).first == 1);

  CHECK_KIND(parse_network("species A\nA -> B : const(1)", {.strict = true}), ErrorKind::UnknownSpecies);
  CHECK_KIND(parse_network("species A, A", {.strict = true}), ErrorKind::DuplicateSpecies);
  CHECK_NOTHROW(parse_network("species A, B\nA -> B : const(1)", {.strict = true}));
}

TEST_CASE("canonical serialization") {
  const auto m = parse_network("A + B -> C : const(2.0)");
  CHECK(serialize_network(m.species, m.reactions) == "# cpn mechanism\nspecies A, B, C\nA + B -> C : const(2.000000)\n");
  const std::vector<Species> none;
  const std::vector<Reaction> no_reactions;
  const auto empty = serialize_network(none, no_reactions);
  CHECK(empty == "# cpn mechanism\n");
  const auto back = parse_network(empty);
  CHECK(back.species.empty());
  CHECK(back.reactions.empty());

  CHECK(format_number(2.0) == "2.000000");
  CHECK(format_number(0.0) == "0.000000");
  CHECK(format_number(1e-13) == "1e-13");
  CHECK(format_number(0.1) == "0.100000");
  CHECK(format_number(1.0 / 3.0) == "0.3333333333333333");
}

TEST_CASE("randomized round trip") {
  std::mt19937_64 rng(1234);
  testing::RandomNetworkOptions o;
  o.max_reactions = 10;
  for (int trial = 0; trial < 300; ++trial) {
    const auto net = testing::random_network(rng, o);
    const auto text = serialize_network(net);
    const auto back = parse_network(text).network(net.temp_mean());
    CHECK_MESSAGE(back == net, text);
    CHECK(serialize_network(back) == text);
  }
}

TEST_CASE("fuzzed input never escapes as anything but a parse error") {
  std::mt19937_64 rng(99);
  const std::string alphabet = "AB2 +-># :(){},.=e\nconstarhniuspd01\t";
  std::uniform_int_distribution<int> len(0, 60);
  std::uniform_int_distribution<int> byte(0, 255);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t accepted = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    std::string text;
    const int n = len(rng);
    const bool raw = u(rng) < 0.3;
    for (int i = 0; i < n; ++i) text += raw ? static_cast<char>(byte(rng)) : alphabet[pick(rng)];
    try {
      const auto m = parse_network(text);
      ++accepted;
      CHECK(m.reactions.size() == m.reaction_lines.size());
    } catch (const ParseError& e) {
      CHECK(e.line() >= 1);
      CHECK(e.column() >= 1);
    }
  }
  CHECK(accepted > 0);
}

TEST_CASE("removing a precursor is line deletion") {
  const std::string text =
      "species C4F8 {C:4, F:8}, CF2 {C:1, F:2}, F {F:1}\n"
      "C4F8 -> 4 CF2 : const(1)\n"
      "CF2 + F -> CF3 : const(2)\n"
      "CF3 -> CF2 + F : const(0.5) # C4F8 is not involved\n";
  const auto stripped = remove_species_lines(text, "C4F8");
  const auto m = parse_network(stripped);
  for (const auto& s : m.species) CHECK(s.name != "C4F8");
  CHECK(m.reactions.size() == 2);

  // Names that merely contain the removed name stay.
  const auto ar = parse_network(remove_species_lines("Ar -> Ar+ : const(1)\nAr+ -> X : const(1)\n", "Ar"));
  REQUIRE(ar.reactions.size() == 1);
  CHECK(ar.species[0].name == "Ar+");

  // Element symbols are not species.
  const auto el = parse_network(remove_species_lines("species F {F:1}\nspecies G {F:2}\nF -> G : const(1)\n", "G"));
  CHECK(el.species.size() == 1);
  CHECK(el.reactions.empty());
}
