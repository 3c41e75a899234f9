#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "cpn/etching.hpp"
#include "cpn/mechanism.hpp"
#include "support.hpp"

using namespace cpn;
using namespace cpn::etch;

namespace {

EtchParams unit_params() {
  EtchParams p;
  p.k1 = p.k2 = p.k3 = p.k4 = p.k5 = 1.0;
  return p;
}

SystemState state_with(std::initializer_list<std::pair<etch::Species, double>> values) {
  SystemState s{0.0, std::vector<double>(kCount, 0.0), std::vector<double>(kCount, 1.0)};
  s.concentrations[Source] = 1.0;
  for (const auto& [sp, v] : values) s.concentrations[sp] = v;
  return s;
}

Trajectory run(const EtchParams& p, double t_end) {
  IntegrationOptions o;
  o.rel_tol = 1e-8;
  return integrate(build_etch_network(p), initial_state(p), t_end, o);
}

}  // namespace

TEST_CASE("rate equations by direct substitution") {
  const auto p = unit_params();
  const auto net = build_etch_network(p);
  const auto dp = derivative(net, state_with({{Ion, 1.0}, {Substrate, 2.0}, {Product, 0.5}, {Excited, 0.3}}));
  CHECK(dp[Product] == doctest::Approx(1.8).epsilon(1e-15));

  auto q = unit_params();
  q.k4 = 2.0;
  const auto dc = derivative(build_etch_network(q),
                             state_with({{Dnp, 1.0}, {Photon, 0.5}, {Ion, 1.0}, {C4F8, 0.25}}));
  CHECK(dc[C4F8] == doctest::Approx(0.75).epsilon(1e-15));

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    EtchParams r;
    r.k1 = u(rng), r.k2 = u(rng), r.k5 = u(rng), r.ion_source = u(rng);
    const auto s = state_with({{Ion, u(rng)}, {Substrate, u(rng)}, {Product, u(rng)}, {C4F8, u(rng)}});
    const auto& n = s.concentrations;
    const double expected = -r.k1 * n[Ion] * n[Substrate] - r.k2 * n[Ion] * n[Product] -
                            r.k5 * n[Ion] * n[C4F8] + r.ion_source;
    const double got = derivative(build_etch_network(r), s)[Ion];
    CHECK(std::abs(got - expected) <= 1e-14 * (1.0 + std::abs(expected)) * 10);
  }
  CHECK(check_rate_equations(net, p).empty());
}

TEST_CASE("rate equation check flags a tampered network") {
  const auto p = EtchParams{};
  const auto net = build_etch_network(p);
  std::vector<Reaction> reactions(net.reactions().begin(), net.reactions().end());
  reactions[2].products = {{Photon, 1}};  // drop the product return of the emission step
  const ReactionNetwork tampered({net.species().begin(), net.species().end()}, reactions);
  CHECK_FALSE(check_rate_equations(tampered, p).empty());
}

TEST_CASE("photon ratio") {
  const auto p = unit_params();
  CHECK(photon_ratio(state_with({{Dnp, 1.0}, {Photon, 0.5}, {Excited, 1.0}}), p).value == 0.5);
  CHECK_FALSE(photon_ratio(state_with({{Dnp, 1.0}, {Photon, 0.5}, {Excited, 1.0}}), p).warning);
  CHECK(photon_ratio(state_with({{Dnp, 1.0}, {Excited, 1.0}}), p).value == 0.0);
  CHECK(photon_ratio(state_with({{Dnp, 4.0}, {Photon, 0.5}, {Excited, 1.0}}), p).warning);
  CHECK_KIND(photon_ratio(state_with({{Dnp, 1.0}, {Photon, 0.5}}), p), ErrorKind::ZeroGenerationRate);

  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.01, 5.0);
  for (int trial = 0; trial < 100; ++trial) {
    const auto s = state_with({{Dnp, u(rng)}, {Photon, u(rng)}, {Excited, u(rng)}});
    auto twice = s;
    twice.concentrations[Photon] *= 2.0;
    CHECK(photon_ratio(twice, p).value == 2.0 * photon_ratio(s, p).value);
  }
}

TEST_CASE("combined C4F8 identity holds on random parameter sets") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> k(0.1, 10.0);
  std::uniform_real_distribution<double> n0(0.1, 5.0);
  for (int trial = 0; trial < 25; ++trial) {
    EtchParams p;
    p.k1 = k(rng), p.k2 = k(rng), p.k3 = k(rng), p.k4 = k(rng), p.k5 = k(rng);
    p.k6 = k(rng), p.k7 = k(rng), p.ion_source = k(rng);
    p.n_ion = n0(rng), p.n_s = n0(rng), p.n_DNP = n0(rng);
    const auto traj = run(p, 5.0);
    const auto d = derivation_residuals(traj, p);
    CHECK(d.eq7_max_normalized <= 1e-9);
    CHECK(d.t.size() == traj.size());
    CHECK(d.eq9_residual.size() == traj.size());
    CHECK(d.eq10_predicted_rate.size() == traj.size());
  }
}

TEST_CASE("equilibrium trajectory") {
  EtchParams p;
  p.ion_source = 0.0;
  p.n_ion = 0.0;
  p.n_DNP = 0.0;
  p.n_s = 1.0;
  Trajectory traj;
  const auto s0 = initial_state(p);
  const auto net = build_etch_network(p);
  for (int i = 0; i < 5; ++i) {
    auto s = s0;
    s.t = i;
    traj.push(s, derivative(net, s));
  }
  const auto d = derivation_residuals(traj, p);
  for (const double r : d.eq7_residual) {
    if (!std::isnan(r)) CHECK(r == 0.0);
  }
  CHECK(d.zero_crossing_count == 0);
  traj.states.resize(2);
  traj.derivatives.resize(2);
  CHECK_KIND(derivation_residuals(traj, p), ErrorKind::InsufficientPoints);
}

TEST_CASE("sign change counting") {
  const std::vector<double> alternating{1.0, -1.0, 1.0, -1.0};
  CHECK(count_sign_changes(alternating) == 3);
  const std::vector<double> decay{-1.0, -0.5, -0.25, -0.1};
  CHECK(count_sign_changes(decay) == 0);
  const std::vector<double> noisy{1.0, 1e-9, -1e-9, 1.0, -1.0};
  CHECK(count_sign_changes(noisy, 1e-6) == 1);
  CHECK(count_sign_changes(noisy) == 3);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> scale(1e-6, 1e6);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> v(50);
    for (auto& x : v) x = g(rng);
    const double c = scale(rng);
    auto scaled = v;
    for (auto& x : scaled) x *= c;
    CHECK(count_sign_changes(scaled) == count_sign_changes(v));
    CHECK(count_sign_changes(scaled, 0.1 * c) == count_sign_changes(v, 0.1));
  }

  const auto p = EtchParams{};
  const auto net = build_etch_network(p);
  const auto traj = run(p, 1.0);
  CHECK_KIND(detect_oscillation(net, traj, "nope"), ErrorKind::UnknownSpecies);
  CHECK(detect_oscillation(net, traj, "s") == 0);  // substrate only ever decreases
}

TEST_CASE("default parameters oscillate and anti-correlate") {
  const EtchParams p;
  const auto traj = run(p, 200.0 / p.k1);
  const auto d = derivation_residuals(traj, p);
  CHECK(d.zero_crossing_count >= 3);
  CHECK(c4f8_crossings(traj) == d.zero_crossing_count);
  CHECK(d.eq7_max_normalized <= 1e-9);
  const double r = pearson(traj.series(C4F8), traj.derivative_series(Product));
  CHECK(r < 0.0);
}

TEST_CASE("disabling the valve removes the oscillation") {
  EtchParams p;
  p.k4 = 0.0;
  const auto traj = run(p, 200.0 / p.k1);
  CHECK(c4f8_crossings(traj) == 0);
  const auto c = traj.series(C4F8);
  for (std::size_t i = 1; i < c.size(); ++i) CHECK(c[i] <= c[i - 1]);

  EtchParams seeded = p;
  seeded.n_C4F8 = 1.0;
  const auto decay = run(seeded, 50.0);
  const auto cs = decay.series(C4F8);
  for (std::size_t i = 1; i < cs.size(); ++i) CHECK(cs[i] <= cs[i - 1]);
  CHECK(detect_oscillation(build_etch_network(seeded), decay, "C4F8") == 0);
}

TEST_CASE("centered differences and correlation") {
  const std::vector<double> t{0.0, 0.5, 1.5, 2.0, 4.0};
  std::vector<double> quad;
  for (const double x : t) quad.push_back(x * x);
  const auto d = centered_difference(t, quad);
  // Three-point non-uniform stencils are exact for quadratics in the interior.
  for (std::size_t i = 1; i + 1 < t.size(); ++i) CHECK(d[i] == doctest::Approx(2.0 * t[i]).epsilon(1e-12));
  CHECK_KIND(centered_difference(std::vector<double>{0.0, 1.0}, std::vector<double>{0.0, 1.0}),
             ErrorKind::InsufficientPoints);

  const std::vector<double> a{1.0, 2.0, 3.0, 4.0};
  const std::vector<double> b{8.0, 6.0, 4.0, 2.0};
  CHECK(pearson(a, b) == doctest::Approx(-1.0));
  CHECK(std::isnan(pearson(a, std::vector<double>{1.0, 1.0, 1.0, 1.0})));
  CHECK_KIND(pearson(a, std::vector<double>{1.0}), ErrorKind::InsufficientPoints);
}

TEST_CASE("parameters from a mechanism") {
  const EtchParams defaults;
  const auto text = serialize_network(build_etch_network(defaults));
  const auto net = parse_network(text).network();
  const auto back = params_from_network(net);
  CHECK(back.k1 == defaults.k1);
  CHECK(back.k5 == defaults.k5);
  CHECK(back.ion_source == defaults.ion_source);

  const auto without = params_from_network(parse_network(remove_species_lines(text, "hv_esc")).network());
  CHECK(without.k7 == 0.0);
  CHECK(without.k4 == defaults.k4);

  CHECK_KIND(params_from_network(parse_network("ion -> s : const(1)").network()), ErrorKind::InvalidReaction);
  CHECK_KIND(params_from_network(parse_network("TTF -> DNP : const(1)\nTTF -> DNP : const(2)").network()),
             ErrorKind::InvalidReaction);
  CHECK_KIND(params_from_network(parse_network("TTF -> DNP : arrhenius(A=1, Ea=1)").network()),
             ErrorKind::InvalidReaction);
  CHECK_KIND(EtchParams{.k1 = -1.0}.validate(), ErrorKind::InvalidValue);
}
