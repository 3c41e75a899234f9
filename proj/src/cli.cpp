#include "cpn/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "cpn/error.hpp"
#include "cpn/etching.hpp"
#include "cpn/fit.hpp"
#include "cpn/integrator.hpp"
#include "cpn/mechanism.hpp"
#include "cpn/network.hpp"
#include "cpn/tweezer.hpp"

namespace cpn::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// ---- small utilities ----------------------------------------------------

[[noreturn]] void config_error(const std::string& message) { throw Error(ErrorKind::Config, message); }

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    config_error(path + ": " + e.what());
  }
}

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) config_error(where + " must be a JSON object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.contains(key)) config_error("unknown key '" + key + "' in " + where);
  }
}

template <class T>
void read(const json& j, const char* key, T& value) {
  if (!j.contains(key)) return;
  try {
    value = j.at(key).get<T>();
  } catch (const json::exception& e) {
    config_error(std::string("bad value for '") + key + "': " + e.what());
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) config_error("cannot write " + path);
  return out;
}

fs::path relative_to(const std::string& base_file, const std::string& path) {
  const fs::path p(path);
  return p.is_absolute() ? p : fs::path(base_file).parent_path() / p;
}

IntegrationOptions integration_from(const json& j) {
  IntegrationOptions o;
  if (j.is_null()) return o;
  check_keys(j, "integration", {"method", "dt_init", "dt_min", "dt_max", "rel_tol", "abs_tol", "max_steps"});
  std::string method = "adaptive";
  read(j, "method", method);
  if (method == "adaptive") {
    o.method = Method::AdaptiveStiff;
  } else if (method == "rk4") {
    o.method = Method::RK4Fixed;
  } else if (method == "euler") {
    o.method = Method::ExplicitEuler;
  } else {
    config_error("method must be adaptive, rk4 or euler");
  }
  read(j, "dt_init", o.dt_init);
  read(j, "dt_min", o.dt_min);
  read(j, "dt_max", o.dt_max);
  read(j, "rel_tol", o.rel_tol);
  if (j.contains("abs_tol")) {
    double a = 0.0;
    read(j, "abs_tol", a);
    o.abs_tol = a;
  }
  read(j, "max_steps", o.max_steps);
  return o;
}

std::pair<std::string, double> split_assignment(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw CLI::ValidationError("expected NAME=VALUE, got '" + text + "'");
  const std::string value = text.substr(eq + 1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw CLI::ValidationError("'" + value + "' is not a number");
  }
  return {text.substr(0, eq), v};
}

void write_trajectory_csv(std::ostream& out, const ReactionNetwork& net, const Trajectory& traj) {
  out << "t";
  for (const auto& s : net.species()) out << ',' << s.name;
  out << '\n';
  for (const auto& state : traj.states) {
    out << csv_number(state.t);
    for (const double n : state.concentrations) out << ',' << csv_number(n);
    out << '\n';
  }
}

void write_trajectory_json(std::ostream& out, const ReactionNetwork& net, const Trajectory& traj) {
  json j;
  j["species"] = json::array();
  for (const auto& s : net.species()) j["species"].push_back(s.name);
  j["t"] = traj.times();
  j["concentrations"] = json::array();
  for (const auto& s : traj.states) j["concentrations"].push_back(s.concentrations);
  out << j.dump(2) << '\n';
}

void write_gnuplot(const std::string& path, const std::string& data, std::size_t columns, bool logx,
                   const std::string& xlabel, const std::string& ylabel, std::size_t first_column = 2) {
  auto out = open_out(path);
  out << "set datafile separator ','\n"
      << "set key autotitle columnhead\n"
      << "set xlabel '" << xlabel << "'\n"
      << "set ylabel '" << ylabel << "'\n";
  if (logx) out << "set logscale x\n";
  out << "plot for [i=" << first_column << ":" << columns << "] '" << data << "' using 1:i with lines\n";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  return out;
}

double parse_double(const std::string& text, const std::string& where) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) config_error(where + ": '" + text + "' is not a number");
  return v;
}

// Target CSV "t,<species...>" onto the network's species; absent species are 0.
std::pair<Trajectory, std::vector<std::size_t>> read_target_csv(const fs::path& path, const ReactionNetwork& net) {
  std::ifstream in(path);
  if (!in) config_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) config_error(path.string() + ": empty file");
  const auto header = split_csv_line(line);
  if (header.empty() || header[0] != "t") config_error(path.string() + ": header must start with 't'");
  std::vector<std::size_t> columns;
  for (std::size_t c = 1; c < header.size(); ++c) columns.push_back(net.species_index(header[c]));
  Trajectory traj;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    const std::string where = path.string() + ":" + std::to_string(row);
    if (cells.size() != header.size()) config_error(where + ": expected " + std::to_string(header.size()) + " cells");
    SystemState s{parse_double(cells[0], where), std::vector<double>(net.species_count(), 0.0),
                  std::vector<double>(net.species_count(), 1.0)};
    for (std::size_t c = 1; c < cells.size(); ++c) s.concentrations[columns[c - 1]] = parse_double(cells[c], where);
    traj.push(std::move(s), {});
  }
  if (traj.empty()) config_error(path.string() + ": no data rows");
  return {std::move(traj), columns};
}

// Runs f(i) for i in [0, n) on `jobs` threads. Exceptions are rethrown in index order.
template <class F>
void parallel_for(std::size_t n, unsigned jobs, F&& f) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned count = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, jobs), std::max<std::size_t>(n, 1)));
  std::vector<std::thread> threads;
  for (unsigned t = 1; t < count; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// ---- etch configuration ---------------------------------------------------

struct EtchConfig {
  etch::EtchParams params;
  double t_end = 0.0;  // 0: 200 / k1
  IntegrationOptions integration{};
};

void apply_etch_value(etch::EtchParams& p, const std::string& key, double v) {
  static const std::map<std::string, double etch::EtchParams::*> fields = {
      {"k1", &etch::EtchParams::k1},     {"k2", &etch::EtchParams::k2},
      {"k3", &etch::EtchParams::k3},     {"k4", &etch::EtchParams::k4},
      {"k5", &etch::EtchParams::k5},     {"k6", &etch::EtchParams::k6},
      {"k7", &etch::EtchParams::k7},     {"ion_source", &etch::EtchParams::ion_source},
      {"ion", &etch::EtchParams::n_ion}, {"s", &etch::EtchParams::n_s},
      {"p", &etch::EtchParams::n_p},     {"ex", &etch::EtchParams::n_ex},
      {"hv", &etch::EtchParams::n_hv},   {"C4F8", &etch::EtchParams::n_C4F8},
      {"op", &etch::EtchParams::n_op},   {"DNP", &etch::EtchParams::n_DNP},
      {"TTF", &etch::EtchParams::n_TTF}};
  const auto it = fields.find(key);
  if (it == fields.end()) config_error("unknown etch parameter '" + key + "'");
  p.*(it->second) = v;
}

EtchConfig load_etch_config(const std::string& path) {
  EtchConfig c;
  if (path.empty()) return c;
  const json j = load_json(path);
  check_keys(j, path, {"rates", "initial", "t_end", "integration"});
  for (const char* section : {"rates", "initial"}) {
    if (!j.contains(section)) continue;
    if (!j[section].is_object()) config_error(std::string(section) + " must be an object");
    for (const auto& [key, value] : j[section].items()) {
      if (!value.is_number()) config_error("'" + key + "' must be a number");
      apply_etch_value(c.params, key, value.get<double>());
    }
  }
  read(j, "t_end", c.t_end);
  if (j.contains("integration")) c.integration = integration_from(j["integration"]);
  return c;
}

// ---- signal configuration -------------------------------------------------

struct SignalConfig {
  signal::EMWave wave{8e12, 1e10, 0.0, 0.0};
  signal::PopulationSpec population{};
  std::vector<signal::GuestCount> guest_map;  // overrides the built-in mapping when set
  signal::SignalChemParams chemistry{};
  signal::ResponseOptions response{};
};

SignalConfig load_signal_config(const std::string& path) {
  SignalConfig c;
  if (path.empty()) return c;
  const json j = load_json(path);
  check_keys(j, path, {"wave", "window", "population", "chemistry", "response"});
  if (j.contains("wave")) {
    const auto& w = j["wave"];
    check_keys(w, "wave", {"E0", "frequency", "polarization", "phase"});
    read(w, "E0", c.wave.E0);
    read(w, "frequency", c.wave.frequency);
    read(w, "polarization", c.wave.polarization);
    read(w, "phase", c.wave.phase);
  }
  if (j.contains("window")) {
    const auto& w = j["window"];
    check_keys(w, "window", {"duration", "periods", "steps_per_period", "force_form"});
    read(w, "duration", c.response.window.duration);
    read(w, "periods", c.response.window.periods);
    read(w, "steps_per_period", c.response.window.steps_per_period);
    std::string form = "acceleration";
    read(w, "force_form", form);
    if (form == "acceleration") {
      c.response.window.form = signal::ForceForm::Acceleration;
    } else if (form == "literal") {
      c.response.window.form = signal::ForceForm::Literal;
    } else {
      config_error("force_form must be acceleration or literal");
    }
  }
  if (j.contains("population")) {
    const auto& p = j["population"];
    check_keys(p, "population",
               {"count", "length_min", "length_max", "tip_charge_e", "linear_density", "rod_segments",
                "guest_mass_amu", "hub_mass_amu", "hub_radius", "phi0", "omega0", "count_scale",
                "bond_energy_ev", "gap", "guest_count_map"});
    auto& s = c.population;
    read(p, "count", s.count);
    read(p, "length_min", s.length_min);
    read(p, "length_max", s.length_max);
    if (p.contains("tip_charge_e")) s.tip_charge = p["tip_charge_e"].get<double>() * signal::PhysConstants{}.e;
    read(p, "linear_density", s.linear_density);
    read(p, "rod_segments", s.rod_segments);
    if (p.contains("guest_mass_amu")) s.guest_mass = p["guest_mass_amu"].get<double>() * signal::kAmu;
    if (p.contains("hub_mass_amu")) s.hub_mass = p["hub_mass_amu"].get<double>() * signal::kAmu;
    read(p, "hub_radius", s.hub_radius);
    read(p, "phi0", s.phi0);
    read(p, "omega0", s.omega0);
    read(p, "count_scale", s.count_scale);
    read(p, "bond_energy_ev", s.bond_energy_ev);
    read(p, "gap", s.gap);
    if (p.contains("guest_count_map")) {
      for (const auto& entry : p["guest_count_map"]) {
        if (!entry.is_array() || entry.size() != 2) config_error("guest_count_map entries are [length, count]");
        c.guest_map.push_back({entry[0].get<double>(), entry[1].get<long long>()});
      }
    }
  }
  if (j.contains("chemistry")) {
    const auto& k = j["chemistry"];
    check_keys(k, "chemistry",
               {"k2", "k3", "k4", "k5", "n_gas", "n_e", "n_i_g", "n_i_gas", "n_g", "density_per_guest"});
    auto& p = c.chemistry;
    read(k, "k2", p.k2);
    read(k, "k3", p.k3);
    read(k, "k4", p.k4);
    read(k, "k5", p.k5);
    read(k, "n_gas", p.n_gas);
    read(k, "n_e", p.n_e);
    read(k, "n_i_g", p.n_i_g);
    read(k, "n_i_gas", p.n_i_gas);
    read(k, "n_g", p.n_g);
    read(k, "density_per_guest", p.density_per_guest);
  }
  if (j.contains("response")) {
    const auto& r = j["response"];
    check_keys(r, "response", {"settle", "steady_tol", "integration"});
    read(r, "settle", c.response.settle);
    read(r, "steady_tol", c.response.steady_tol);
    if (r.contains("integration")) c.response.integration = integration_from(r["integration"]);
  }
  return c;
}

// ---- subcommands ------------------------------------------------------------

struct SimulateArgs {
  std::string mechanism;
  std::string config;
  double t_end = 0.0;
  std::vector<std::string> init;
  double temperature = 1.0;
  std::string method;
  double dt = 0.0;
  double rel_tol = 0.0;
  double abs_tol = 0.0;
  std::string temp_mean = "distinct";
  bool strict = false;
  std::string format = "csv";
  std::string out;
  std::string gnuplot;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  json cfg = json::object();
  if (!a.config.empty()) {
    cfg = load_json(a.config);
    check_keys(cfg, a.config, {"mechanism", "t_end", "initial", "temperature", "temp_mean", "integration"});
  }
  std::string mech_path = a.mechanism;
  if (mech_path.empty() && cfg.contains("mechanism")) {
    mech_path = relative_to(a.config, cfg["mechanism"].get<std::string>()).string();
  }
  if (mech_path.empty()) throw CLI::RequiredError("a mechanism file (positional or in --config)");

  std::string temp_mean = a.temp_mean;
  if (temp_mean == "distinct" && cfg.contains("temp_mean")) temp_mean = cfg["temp_mean"].get<std::string>();
  if (temp_mean != "distinct" && temp_mean != "stoichiometric") config_error("temp_mean must be distinct or stoichiometric");
  const auto mech = load_mechanism(mech_path, ParseOptions{a.strict});
  const auto net = mech.network(temp_mean == "distinct" ? TempMean::Distinct : TempMean::Stoichiometric);

  double temperature = a.temperature;
  if (temperature == 1.0) read(cfg, "temperature", temperature);
  std::vector<double> n(net.species_count(), 0.0);
  if (cfg.contains("initial")) {
    for (const auto& [name, value] : cfg["initial"].items()) n[net.species_index(name)] = value.get<double>();
  }
  for (const auto& item : a.init) {
    const auto [name, value] = split_assignment(item);
    n[net.species_index(name)] = value;
  }
  double t_end = a.t_end;
  if (t_end <= 0.0) read(cfg, "t_end", t_end);
  if (!(t_end > 0.0)) throw CLI::ValidationError("--t-end must be > 0");

  auto opts = integration_from(cfg.contains("integration") ? cfg["integration"] : json());
  if (a.method == "adaptive") opts.method = Method::AdaptiveStiff;
  if (a.method == "rk4") opts.method = Method::RK4Fixed;
  if (a.method == "euler") opts.method = Method::ExplicitEuler;
  if (a.dt > 0.0) opts.dt_init = a.dt;
  if (a.rel_tol > 0.0) opts.rel_tol = a.rel_tol;
  if (a.abs_tol > 0.0) opts.abs_tol = a.abs_tol;

  const auto traj = integrate(net, make_state(net, n, temperature), t_end, opts);
  auto file = open_out(a.out);
  if (a.format == "json") {
    write_trajectory_json(file, net, traj);
  } else {
    write_trajectory_csv(file, net, traj);
  }
  if (!a.gnuplot.empty()) {
    write_gnuplot(a.gnuplot, a.out, net.species_count() + 1, false, "t", "concentration");
  }
  out << "wrote " << traj.size() << " states to " << a.out << '\n';
  return 0;
}

struct EtchArgs {
  std::string config;
  std::string mechanism;
  std::vector<std::string> set;
  double t_end = 0.0;
  double rel_tol = 0.0;
  std::string out;
  std::string diag;
  std::string format = "csv";
  std::string gnuplot;
};

int cmd_etch(const EtchArgs& a, std::ostream& out, std::ostream& err) {
  auto cfg = load_etch_config(a.config);
  if (!a.mechanism.empty()) {
    cfg.params = etch::params_from_network(load_mechanism(a.mechanism).network(), cfg.params);
  }
  for (const auto& item : a.set) {
    const auto [key, value] = split_assignment(item);
    apply_etch_value(cfg.params, key, value);
  }
  if (a.t_end > 0.0) cfg.t_end = a.t_end;
  if (a.rel_tol > 0.0) cfg.integration.rel_tol = a.rel_tol;
  if (cfg.t_end <= 0.0) {
    if (!(cfg.params.k1 > 0.0)) config_error("t_end is required when k1 is 0");
    cfg.t_end = 200.0 / cfg.params.k1;
  }

  const auto net = etch::build_etch_network(cfg.params);
  const auto mismatches = etch::check_rate_equations(net, cfg.params);
  for (const auto& m : mismatches) err << "warning: " << m << '\n';
  const auto traj = integrate(net, etch::initial_state(cfg.params), cfg.t_end, cfg.integration);

  auto file = open_out(a.out);
  if (a.format == "json") {
    write_trajectory_json(file, net, traj);
  } else {
    write_trajectory_csv(file, net, traj);
  }
  if (!a.gnuplot.empty()) write_gnuplot(a.gnuplot, a.out, net.species_count() + 1, false, "t", "concentration");

  if (!a.diag.empty()) {
    json d;
    if (traj.size() >= 3) {
      const auto diag = etch::derivation_residuals(traj, cfg.params);
      std::size_t warnings = 0;
      for (const double r : diag.photon_ratio) warnings += r >= 1.0 ? 1 : 0;
      d["t"] = diag.t;
      d["photon_ratio"] = diag.photon_ratio;
      d["phi"] = diag.phi;
      d["psi"] = diag.psi;
      d["omega"] = diag.omega;
      d["eq7_residual"] = diag.eq7_residual;
      d["eq9_residual"] = diag.eq9_residual;
      d["eq10_predicted_rate"] = diag.eq10_predicted_rate;
      d["dp_dt"] = diag.dp_dt;
      d["eq7_max_normalized"] = diag.eq7_max_normalized;
      d["eq9_max_abs"] = diag.eq9_max_abs;
      d["zero_crossing_count"] = diag.zero_crossing_count;
      d["zero_crossing_abs_tol"] = diag.crossing_abs_tol;
      d["undefined_photon_ratio_points"] = diag.undefined_points;
      d["photon_ratio_warnings"] = warnings;
      d["pearson_C4F8_vs_dp_dt"] =
          etch::pearson(traj.series(etch::C4F8), traj.derivative_series(etch::Product));
    } else {
      d["error"] = "fewer than 3 samples";
    }
    d["rate_equation_mismatches"] = mismatches;
    auto f = open_out(a.diag);
    f << d.dump(2) << '\n';
  }
  out << "wrote " << traj.size() << " states to " << a.out << '\n';
  return 0;
}

struct SignalArgs {
  std::string config;
  std::string freq_scan;
  double freq = 0.0;
  double E0 = -1.0;
  int jobs = 0;
  std::string out;
  std::string bands;
  std::string gnuplot;
};

int cmd_signal(const SignalArgs& a, std::ostream& out, std::ostream& err) {
  auto cfg = load_signal_config(a.config);
  if (a.E0 >= 0.0) cfg.wave.E0 = a.E0;
  if (a.freq > 0.0) cfg.wave.frequency = a.freq;
  auto pop = cfg.population.build();
  if (!cfg.guest_map.empty()) pop.guest_count_map = cfg.guest_map;

  const std::vector<double> freqs =
      a.freq_scan.empty() ? std::vector<double>{cfg.wave.frequency} : parse_frequency_scan(a.freq_scan);
  std::vector<signal::Response> responses(freqs.size());
  std::vector<std::vector<double>> peaks(freqs.size());
  parallel_for(freqs.size(), resolve_jobs(a.jobs), [&](std::size_t i) {
    auto wave = cfg.wave;
    wave.frequency = freqs[i];
    peaks[i] = signal::peak_forces(pop, wave, cfg.response.window);
    long long released = 0;
    for (std::size_t m = 0; m < peaks[i].size(); ++m) {
      if (peaks[i][m] > 0.0 && peaks[i][m] >= pop.F_bc) released += pop.guest_count(pop.models[m].length);
    }
    responses[i] = signal::respond_to_count(released, cfg.chemistry, cfg.response);
  });

  auto file = open_out(a.out);
  file << "frequency_hz,n_g_released,omega_p_rad_s\n";
  for (std::size_t i = 0; i < freqs.size(); ++i) {
    file << csv_number(freqs[i]) << ',' << responses[i].released << ',' << csv_number(responses[i].omega_p) << '\n';
    if (!responses[i].converged) {
      err << "warning: chemistry not at steady state at " << csv_number(freqs[i]) << " Hz\n";
    }
  }
  if (!a.bands.empty()) {
    auto b = open_out(a.bands);
    b << "frequency_hz";
    for (const auto& m : pop.models) b << ",L_" << csv_number(m.length);
    b << '\n';
    for (std::size_t i = 0; i < freqs.size(); ++i) {
      b << csv_number(freqs[i]);
      for (const double p : peaks[i]) b << ',' << csv_number(p);
      b << '\n';
    }
  }
  if (!a.gnuplot.empty()) write_gnuplot(a.gnuplot, a.out, 3, true, "frequency (Hz)", "omega_p (rad/s)", 3);
  out << "wrote " << freqs.size() << " rows to " << a.out << '\n';
  return 0;
}

struct FitArgs {
  std::string problem;
  std::string out;
  int jobs = 0;
  long long max_evaluations = -1;
  long long starts = -1;
  long long seed = -1;
};

int cmd_fit(const FitArgs& a, std::ostream& out) {
  const json j = load_json(a.problem);
  check_keys(j, a.problem,
             {"mechanism", "target", "free", "species", "weights", "initial", "initial_guess", "max_evaluations",
              "starts", "seed", "integration"});
  if (!j.contains("mechanism") || !j.contains("target") || !j.contains("free")) {
    config_error("fit problem needs mechanism, target and free");
  }
  fit::FitProblem p;
  p.network = load_mechanism(relative_to(a.problem, j["mechanism"].get<std::string>()).string()).network();
  auto [target, columns] = read_target_csv(relative_to(a.problem, j["target"].get<std::string>()), p.network);
  p.target = std::move(target);

  if (j.contains("species")) {
    for (const auto& name : j["species"]) p.species.push_back(p.network.species_index(name.get<std::string>()));
  } else {
    p.species = columns;
  }
  read(j, "weights", p.weights);
  for (const auto& f : j["free"]) {
    check_keys(f, "free parameter", {"reaction", "lower", "upper"});
    fit::FreeParameter fp;
    read(f, "reaction", fp.reaction);
    read(f, "lower", fp.lower);
    read(f, "upper", fp.upper);
    p.parameters.push_back(fp);
  }
  // Initial state: explicit values, otherwise the first target row.
  std::vector<double> n = p.target.states.front().concentrations;
  if (j.contains("initial")) {
    std::fill(n.begin(), n.end(), 0.0);
    for (const auto& [name, value] : j["initial"].items()) n[p.network.species_index(name)] = value.get<double>();
  }
  p.initial = make_state(p.network, n, 1.0, p.target.states.front().t);
  read(j, "initial_guess", p.initial_guess);
  read(j, "max_evaluations", p.max_evaluations);
  read(j, "starts", p.starts);
  read(j, "seed", p.seed);
  if (j.contains("integration")) p.integration = integration_from(j["integration"]);
  if (a.max_evaluations >= 0) p.max_evaluations = static_cast<std::size_t>(a.max_evaluations);
  if (a.starts >= 0) p.starts = static_cast<std::size_t>(a.starts);
  if (a.seed >= 0) p.seed = static_cast<unsigned>(a.seed);
  p.jobs = resolve_jobs(a.jobs);

  const auto r = fit::fit_rates(p);
  json o;
  o["parameters"] = json::array();
  for (std::size_t i = 0; i < r.parameters.size(); ++i) {
    o["parameters"].push_back({{"reaction", p.parameters[i].reaction}, {"value", r.parameters[i]}});
  }
  o["loss"] = r.loss;
  o["initial_loss"] = r.initial_loss;
  o["evaluations"] = r.evaluations;
  o["converged"] = r.converged;
  o["budget_exhausted"] = r.budget_exhausted;
  o["best_start"] = r.best_start;
  auto file = open_out(a.out);
  file << o.dump(2) << '\n';
  out << "loss " << csv_number(r.loss) << " after " << r.evaluations << " evaluations\n";
  return 0;
}

int cmd_validate(const std::string& path, bool strict, bool require_composition, std::ostream& out) {
  const auto mech = load_mechanism(path, ParseOptions{strict});
  const auto net = mech.network();
  out << "species " << net.species_count() << ", reactions " << net.reaction_count() << '\n';
  const auto res = elemental_residual(net, require_composition);
  bool balanced = true;
  for (std::size_t e = 0; e < res.elements.size(); ++e) {
    for (std::size_t j = 0; j < net.reaction_count(); ++j) {
      if (res.residual[e][j] != 0) {
        balanced = false;
        out << "line " << mech.reaction_lines[j] << ": element " << res.elements[e] << " changes by "
            << res.residual[e][j] << '\n';
      }
    }
  }
  out << (balanced ? "balanced" : "unbalanced") << '\n';
  return 0;
}

}  // namespace

std::string csv_number(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

unsigned resolve_jobs(int requested) {
  if (requested > 0) return static_cast<unsigned>(requested);
  if (const char* env = std::getenv("CPN_JOBS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<double> parse_frequency_scan(const std::string& spec) {
  const auto a = spec.find(':');
  const auto b = a == std::string::npos ? a : spec.find(':', a + 1);
  if (b == std::string::npos) throw CLI::ValidationError("--freq-scan expects start:stop:count");
  const auto num = [&](const std::string& s) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw CLI::ValidationError("--freq-scan: bad number '" + s + "'");
    return v;
  };
  const double start = num(spec.substr(0, a));
  const double stop = num(spec.substr(a + 1, b - a - 1));
  const std::string count_text = spec.substr(b + 1);
  std::size_t count = 0;
  const auto [ptr, ec] = std::from_chars(count_text.data(), count_text.data() + count_text.size(), count);
  if (ec != std::errc() || ptr != count_text.data() + count_text.size() || count == 0) {
    throw CLI::ValidationError("--freq-scan: count must be a positive integer");
  }
  if (!(start > 0.0) || !(stop > 0.0) || !std::isfinite(start) || !std::isfinite(stop)) {
    throw CLI::ValidationError("--freq-scan: frequencies must be > 0");
  }
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double u = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
    out[i] = std::exp(std::log(start) + u * (std::log(stop) - std::log(start)));
  }
  out.front() = start;
  if (count > 1) out.back() = stop;
  return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Chemical pathway network simulator", "cpn"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Integrate a mechanism file and write the trajectory");
  simulate->add_option("mechanism", sim.mechanism, "Mechanism file")->check(CLI::ExistingFile);
  simulate->add_option("--config", sim.config, "JSON run config (mechanism, t_end, initial, integration)")
      ->check(CLI::ExistingFile);
  simulate->add_option("--t-end", sim.t_end, "End time");
  simulate->add_option("--init", sim.init, "Initial concentration NAME=VALUE (repeatable; others 0)");
  simulate->add_option("--temperature", sim.temperature, "Temperature of every species in eV")->capture_default_str();
  simulate->add_option("--method", sim.method, "Integrator")->check(CLI::IsMember({"adaptive", "rk4", "euler"}));
  simulate->add_option("--dt", sim.dt, "Fixed step, or first trial step for the adaptive method");
  simulate->add_option("--rel-tol", sim.rel_tol, "Relative tolerance");
  simulate->add_option("--abs-tol", sim.abs_tol, "Absolute tolerance");
  simulate->add_option("--temp-mean", sim.temp_mean, "Mean reactant temperature")
      ->check(CLI::IsMember({"distinct", "stoichiometric"}))
      ->capture_default_str();
  simulate->add_flag("--strict", sim.strict, "Require species declarations");
  simulate->add_option("--format", sim.format, "Output format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  simulate->add_option("--out", sim.out, "Output file")->required();
  simulate->add_option("--gnuplot-script", sim.gnuplot, "Also write a gnuplot script for the output");

  EtchArgs et;
  auto* etch_cmd = app.add_subcommand("etch", "Run the etch/passivation network and its diagnostics");
  etch_cmd->add_option("--config", et.config, "JSON etch config (rates, initial, t_end, integration)")
      ->check(CLI::ExistingFile);
  etch_cmd->add_option("--mechanism", et.mechanism, "Mechanism file supplying the etch rate constants")
      ->check(CLI::ExistingFile);
  etch_cmd->add_option("--set", et.set, "Override a rate or initial value, e.g. k4=0 or DNP=2 (repeatable)");
  etch_cmd->add_option("--t-end", et.t_end, "End time (default 200/k1)");
  etch_cmd->add_option("--rel-tol", et.rel_tol, "Relative tolerance");
  etch_cmd->add_option("--out", et.out, "Trajectory output file")->required();
  etch_cmd->add_option("--diag", et.diag, "Diagnostics JSON output file");
  etch_cmd->add_option("--format", et.format, "Trajectory format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  etch_cmd->add_option("--gnuplot-script", et.gnuplot, "Also write a gnuplot script for the trajectory");

  SignalArgs sg;
  auto* signal_cmd = app.add_subcommand("signal", "Tweezer release and plasma-frequency response to a wave");
  signal_cmd->add_option("--config", sg.config, "JSON config (wave, window, population, chemistry, response)")
      ->check(CLI::ExistingFile);
  signal_cmd->add_option("--freq-scan", sg.freq_scan,
                         "Log-spaced scan start:stop:count in Hz, endpoints included (e.g. 1e9:1e12:64)");
  signal_cmd->add_option("--freq", sg.freq, "Single wave frequency in Hz");
  signal_cmd->add_option("--E0", sg.E0, "Wave amplitude in V/m");
  signal_cmd->add_option("--jobs", sg.jobs, "Worker threads (default: CPN_JOBS or logical processors)");
  signal_cmd->add_option("--out", sg.out, "Response CSV output file")->required();
  signal_cmd->add_option("--bands", sg.bands, "Also write peak guest force per length and frequency");
  signal_cmd->add_option("--gnuplot-script", sg.gnuplot, "Also write a gnuplot script for the response");

  FitArgs ft;
  auto* fit_cmd = app.add_subcommand("fit", "Fit free rate coefficients to a target trajectory");
  fit_cmd->add_option("--problem", ft.problem, "JSON fit problem")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--out", ft.out, "Output JSON file")->required();
  fit_cmd->add_option("--jobs", ft.jobs, "Worker threads for the starts (default: CPN_JOBS or logical processors)");
  fit_cmd->add_option("--max-evaluations", ft.max_evaluations, "Evaluation budget over all starts");
  fit_cmd->add_option("--starts", ft.starts, "Number of starts");
  fit_cmd->add_option("--seed", ft.seed, "Seed for the start grid");

  std::string validate_path;
  bool validate_strict = false;
  bool validate_composition = false;
  auto* validate_cmd = app.add_subcommand("validate", "Parse a mechanism and report elemental balance");
  validate_cmd->add_option("mechanism", validate_path, "Mechanism file")->required()->check(CLI::ExistingFile);
  validate_cmd->add_flag("--strict", validate_strict, "Require species declarations");
  validate_cmd->add_flag("--require-composition", validate_composition,
                         "Fail when a reacting species has no composition");

  std::vector<std::string> argv_store{"cpn"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_store) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
    if (simulate->parsed()) return cmd_simulate(sim, out);
    if (etch_cmd->parsed()) return cmd_etch(et, out, err);
    if (signal_cmd->parsed()) return cmd_signal(sg, out, err);
    if (fit_cmd->parsed()) return cmd_fit(ft, out);
    if (validate_cmd->parsed()) return cmd_validate(validate_path, validate_strict, validate_composition, out);
    return 2;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    for (auto& c : msg) {
      if (c == '\n') c = ' ';
    }
    err << "error: " << msg << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (auto& c : msg) {
      if (c == '\n') c = ' ';
    }
    err << "error: " << msg << '\n';
    return 1;
  }
}

}  // namespace cpn::cli
