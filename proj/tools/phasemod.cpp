// phasemod: command-line front end for the phase-model toolkit.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "phasemod/config.hpp"
#include "phasemod/fullsim.hpp"
#include "phasemod/reduce.hpp"

#ifndef PHASEMOD_VERSION
#define PHASEMOD_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace phasemod;

namespace {

constexpr int exit_usage = 2;
constexpr int exit_config = 3;
constexpr int exit_runtime = 4;

struct Preset {
  std::string subcommand;
  std::vector<std::pair<std::string, std::string>> values;
  std::string note;
};

// Values come from figure captions and tables; everything else is a
// documented default.
const std::map<std::string, Preset>& presets() {
  static const std::map<std::string, Preset> p = [] {
    std::map<std::string, Preset> m;
    const auto lamom = [&](const std::string& name, const std::string& signal,
                           const std::string& q0, const std::string& seed) {
      m[name] = {"compare",
                 {{"model", "lamom"}, {"signal", signal}, {"eps", "0.0025"}, {"q0", q0},
                  {"q1", "1"}, {"f", "1"}, {"kappa", "1"}, {"mu", "1000"}, {"seed", seed},
                  {"t-end", "50"}, {"dt", "0.01"}},
                 "lambda-omega pair, full vs reduced"};
    };
    lamom("fig-lamom-a", "periodic", "0.9", "1");
    lamom("fig-lamom-b", "periodic", "1.1", "1");
    lamom("fig-lamom-c", "quasiperiodic", "0.9", "1");
    lamom("fig-lamom-d", "quasiperiodic", "1.1", "1");
    lamom("fig-lamom-e", "ou", "0.85", "2");
    lamom("fig-lamom-f", "ou", "0.9", "1");
    const std::vector<std::pair<std::string, std::string>> hetero{
        {"model", "lamom"}, {"signal", "periodic"}, {"q0", "1.1"}, {"q1", "2"},
        {"f", "1.3"},       {"d", "0.05"},          {"kappa", "1"}, {"t-end", "50"},
        {"dt", "0.01"}};
    auto ha = hetero, hb = hetero;
    ha.emplace_back("eps", "0.025");
    hb.emplace_back("eps", "0.0025");
    m["fig-hetero-a"] = {"compare", ha, "heterogeneous lambda-omega pair"};
    m["fig-hetero-b"] = {"compare", hb, "heterogeneous lambda-omega pair"};
    m["fig-winding"] = {"winding-sweep",
                        {{"q0", "1.1"}, {"q1", "2"}, {"kappa", "1"}, {"d-min", "0"},
                         {"d-max", "0.5"}, {"d-steps", "26"}, {"f-min", "0.1"}, {"f-max", "3"},
                         {"f-steps", "30"}},
                        "rotation numbers over (d, f)"};
    m["fig-traub-prc"] = {"adjoint", {{"model", "traub"}, {"q", "0.1"}}, "iPRC at q = 0.1"};
    m["fig-traub-prc-q05"] = {"adjoint", {{"model", "traub"}, {"q", "0.5"}}, "iPRC at q = 0.5"};
    m["fig-traub-hodd"] = {"hfun", {{"model", "traub"}, {"q", "0.1"}, {"modes", "2"}},
                           "interaction function at q = 0.1"};
    m["fig-traub-hodd-q05"] = {"hfun", {{"model", "traub"}, {"q", "0.5"}, {"modes", "2"}},
                               "interaction function at q = 0.5"};
    const auto traub_pair = [&](const std::string& name, const std::string& signal,
                                const std::string& q0, const std::string& q1,
                                const std::string& seed) {
      m[name] = {"compare",
                 {{"model", "traub"}, {"signal", signal}, {"q0", q0}, {"q1", q1}, {"f", "5"},
                  {"eps", "0.0025"}, {"seed", seed}, {"coefficients", "published"}},
                 "Traub pair, full vs reduced"};
    };
    traub_pair("fig-traub-periodic", "periodic", "0.3", "0.2", "1");
    traub_pair("fig-traub-narrow", "periodic", "0.175", "0.125", "1");
    traub_pair("fig-traub-quasiperiodic", "quasiperiodic", "0.3", "0.2", "1");
    traub_pair("fig-traub-ou", "ou", "0.3", "0.2", "4");
    m["fig-traub-slow-passage"] = {"slow-passage",
                                   {{"model", "traub"}, {"signal", "periodic"}, {"q0", "0.3"},
                                    {"q1", "0.2"}, {"f", "0.5"}, {"phi0", "0.5"},
                                    {"coefficients", "published"}},
                                   "reduced Traub pair, perturbed near synchrony"};
    const std::vector<std::pair<std::string, std::string>> net{
        {"model", "traub"}, {"signal", "periodic"}, {"q0", "0.25"}, {"q1", "0.25"},
        {"f", "0.5"},       {"count", "51"},        {"sigma", "0.01"}, {"eps", "0.0025"},
        {"coefficients", "published"}};
    m["fig-network-reduced"] = {"network-reduced", net, "51-phase network"};
    m["fig-network"] = {"network-full", net, "51-cell Traub network"};
    return m;
  }();
  return p;
}

// ---------------------------------------------------------------------------

struct Run {
  ExperimentConfig cfg;
  std::map<std::string, ValueSource> source;
  std::string subcommand;
  std::string preset;
  fs::path dir;
  json outputs = json::array();
  json results = json::object();

  std::ofstream open(const std::string& name) {
    outputs.push_back(name);
    return open_output((dir / name).string());
  }
};

Model make_model(const ExperimentConfig& c) {
  return c.model == "traub" ? traub_model() : lamom_model(c.kappa);
}

OrbitOptions orbit_options(const ExperimentConfig& c) {
  OrbitOptions o;
  o.grid_size = c.grid;
  o.dt = c.dt;
  return o;
}

bool is_modulated(const ExperimentConfig& c) {
  return c.signal == "periodic" || c.signal == "quasiperiodic";
}

// Slow-time horizon: the t-end key, else three modulation periods for
// deterministic modulation and 50 otherwise.
double horizon(const ExperimentConfig& c) {
  if (c.t_end > 0.0) return c.t_end;
  return is_modulated(c) ? 3.0 * two_pi / c.f : 50.0;
}

SlowSignal make_signal(const ExperimentConfig& c, double tau_end) {
  switch (parse_signal_kind(c.signal)) {
    case SignalKind::constant: return SlowSignal::constant(c.q0);
    case SignalKind::periodic: return SlowSignal::periodic(c.q0, c.q1, c.f);
    case SignalKind::quasiperiodic: return SlowSignal::quasiperiodic(c.q0, c.q1, c.f);
    case SignalKind::ou: {
      if (!(c.eps > 0.0)) throw Error(Errc::configuration, "slowsig", "ou signal needs eps > 0");
      return SlowSignal::ou(c.q0, c.q1, gen_ou(c.seed, c.mu, 1e-3, tau_end, c.eps));
    }
  }
  return SlowSignal::constant(c.q0);
}

// q range covered by the signal, clipped to the model.
std::pair<double, double> q_range(const ExperimentConfig& c, const Model& m) {
  double lo = c.q0 - std::abs(c.q1), hi = c.q0 + std::abs(c.q1);
  if (c.signal == "constant" || hi - lo < 1e-9) {
    lo = c.q0 - 0.05;
    hi = c.q0 + 0.05;
  }
  return {std::max(lo, m.q_min), std::min(hi, m.q_max)};
}

CoefficientInterp h_coefficients(const ExperimentConfig& c, const Model& m) {
  if (c.model == "traub" && c.coefficients == "published") {
    CoefficientInterp ci = reflect(traub_published_coefficients());
    for (auto& s : ci.series) {
      s.a.resize(std::min<std::size_t>(s.a.size(), c.modes));
      s.b.resize(s.a.size());
    }
    return ci;
  }
  const auto [lo, hi] = q_range(c, m);
  std::vector<double> anchors;
  for (int i = 0; i < 5; ++i) anchors.push_back(lo + (hi - lo) * i / 4.0);
  return computed_coefficients(m, anchors, c.modes, orbit_options(c));
}

GSpec reduced_spec(const ExperimentConfig& c, const Model& m) {
  GSpec spec;
  if (c.model == "lamom")
    spec.core = GSpec::LamomClosed{c.kappa};
  else
    spec.core = GSpec::Truncated{h_coefficients(c, m)};
  spec.detuning = c.d;
  return spec;
}

std::size_t stride_for(double span, double step, std::size_t rows) {
  const double n = span / step;
  return std::max<std::size_t>(1, static_cast<std::size_t>(n / static_cast<double>(rows)));
}

// ---------------------------------------------------------------------------

void cmd_orbit(Run& r) {
  const auto& c = r.cfg;
  const Model m = make_model(c);
  const LimitCycle lc = find_limit_cycle(m, c.frozen_q(), orbit_options(c));
  auto f = r.open("cycle.csv");
  write_cycle_csv(f, lc, component_names(m));
  r.results["period"] = lc.period;
  r.results["omega"] = lc.omega;
  r.results["residual"] = lc.residual;
  r.results["periodicity_defect"] = lc.periodicity_defect;
  std::cout << "period " << format_double(lc.period) << '\n';
}

void cmd_adjoint(Run& r) {
  const auto& c = r.cfg;
  const Model m = make_model(c);
  const LimitCycle lc = find_limit_cycle(m, c.frozen_q(), orbit_options(c));
  const AdjointCurve z = compute_adjoint(lc, m.field);
  auto f = r.open("adjoint.csv");
  write_adjoint_csv(f, lc, z, component_names(m));
  r.results["period"] = lc.period;
  r.results["normalization_defect"] = z.normalization_defect;
  r.results["residual"] = z.residual;
}

void cmd_hfun(Run& r) {
  const auto& c = r.cfg;
  const Model m = make_model(c);
  const LimitCycle lc = find_limit_cycle(m, c.frozen_q(), orbit_options(c));
  const AdjointCurve z = compute_adjoint(lc, m.field);
  const InteractionCurve h = interaction_h(lc, z, m.coupling);
  const InteractionCurve ho = h_odd(h);
  const FourierSeries fit = fourier_fit(h, c.modes);
  {
    auto f = r.open("hfun.csv");
    CsvWriter w(f, {"phi", "h", "h_odd", "G", "h_fit"});
    const double dphi = two_pi / static_cast<double>(h.size());
    for (std::size_t k = 0; k < h.size(); ++k) {
      const double phi = dphi * static_cast<double>(k);
      w.row({phi, h.h[k], ho.h[k], -2.0 * ho.h[k], fit(phi)});
    }
  }
  {
    auto f = r.open("series.csv");
    write_series_csv(f, fit);
  }
  // Same coefficients in the half-amplitude, time-unit convention of the
  // published table.
  const double T = lc.period;
  json table = json::object();
  table["a0"] = fit.a0 * T / two_pi;
  for (std::size_t k = 0; k < fit.n_modes(); ++k) {
    table["a" + std::to_string(k + 1)] = fit.a[k] * T / (2.0 * two_pi);
    table["b" + std::to_string(k + 1)] = -fit.b[k] * T / (2.0 * two_pi);
  }
  r.results["period"] = T;
  r.results["fit_residual_rms"] = fit.residual_rms;
  r.results["table_convention"] = table;
}

void cmd_beta(Run& r) {
  const auto& c = r.cfg;
  const Model m = make_model(c);
  const auto [lo, hi] = q_range(c, m);
  std::vector<double> qs;
  for (int i = 0; i < 9; ++i) qs.push_back(lo + (hi - lo) * i / 8.0);
  const PhaseCoefficients pc = tabulate_phase_coefficients(m, qs, orbit_options(c));
  {
    auto f = r.open("beta_table.csv");
    CsvWriter w(f, {"q", "omega", "B"});
    for (std::size_t i = 0; i < qs.size(); ++i) w.row({qs[i], pc.omega[i], pc.beta_coeff[i]});
  }
  const double tau_end = horizon(c);
  const SlowSignal sig = make_signal(c, tau_end);
  auto f = r.open("beta_series.csv");
  CsvWriter w(f, {"tau", "q", "dq_dtau", "beta"});
  const std::size_t n = 2000;
  for (std::size_t k = 0; k <= n; ++k) {
    const double tau = tau_end * static_cast<double>(k) / static_cast<double>(n);
    const SignalValue v = sig.eval(tau);
    const double qc = std::clamp(v.q, lo, hi);
    w.row({tau, v.q, v.dq_dtau, pc.beta_coeff_at(qc) * v.dq_dtau});
  }
}

void write_phase_series(std::ostream& out, const PhaseSeries& s, const SlowSignal& sig) {
  CsvWriter w(out, {"tau", "phi_wrapped", "phi_unwrapped", "q"});
  for (std::size_t k = 0; k < s.size(); ++k)
    w.row({s.times[k], s.wrapped[k], s.unwrapped[k], sig.value(s.times[k])});
}

void cmd_pair_reduced(Run& r) {
  const auto& c = r.cfg;
  const Model m = make_model(c);
  const double tau_end = horizon(c);
  const double dtau = c.dt > 0.0 ? c.dt : 1e-3;
  const SlowSignal sig = make_signal(c, tau_end);
  const PhaseSeries s = integrate_phase_pair(reduced_spec(c, m), c.phi0, sig, tau_end, dtau,
                                             stride_for(tau_end, dtau, 20000));
  auto f = r.open("phase.csv");
  write_phase_series(f, s, sig);
  r.results["phi_final"] = s.wrapped.back();
  r.results["jumps"] = jump_time(s);
}

PairConfig pair_config(const ExperimentConfig& c, const Model& m, double tau_end) {
  PairConfig p;
  p.eps = c.eps;
  p.t_end = tau_end / c.eps;
  p.dt = c.dt;
  p.init_offset = c.phi0;
  const double dt = c.dt > 0.0 ? c.dt : m.dt;
  p.stride = stride_for(p.t_end, dt, 20000);
  if (c.model == "lamom" && c.d != 0.0) p.het_b = lamom_heterogeneity(c.d);
  return p;
}

void cmd_pair_full(Run& r) {
  const auto& c = r.cfg;
  if (!(c.eps > 0.0)) throw Error(Errc::configuration, "fullsim", "pair-full needs eps > 0");
  const Model m = make_model(c);
  const double tau_end = horizon(c);
  const SlowSignal sig = make_signal(c, tau_end);
  const PairRun run = simulate_pair_full(m, sig, pair_config(c, m, tau_end));
  const double q_ref = std::clamp(reference_q(sig, tau_end), m.q_min, m.q_max);
  const PhaseExtractor ex = make_extractor(m, q_ref, orbit_options(c));
  auto f = r.open("pair_full.csv");
  CsvWriter w(f, {"t", "tau", "phi", "q"});
  double last = 0.0;
  for (std::size_t k = 0; k < run.times.size(); ++k) {
    last = wrap_2pi(extract_phase(run.xb[k], ex) - extract_phase(run.xa[k], ex));
    w.row({run.times[k], c.eps * run.times[k], last, run.q[k]});
  }
  r.results["phi_final"] = last;
}

void cmd_compare(Run& r) {
  const auto& c = r.cfg;
  if (!(c.eps > 0.0)) throw Error(Errc::configuration, "fullsim", "compare needs eps > 0");
  const Model m = make_model(c);
  const double tau_end = horizon(c);
  const SlowSignal sig = make_signal(c, tau_end);
  CompareConfig cc;
  cc.pair = pair_config(c, m, tau_end);
  cc.transient_tau = 0.1 * tau_end;
  const ComparisonReport rep = compare_pair(m, sig, reduced_spec(c, m), cc);
  auto f = r.open("compare.csv");
  write_comparison_csv(f, rep);
  r.results["max_abs_error_after_transient"] = rep.max_abs_error;
  r.results["transient_tau"] = cc.transient_tau;
  r.results["phi_full_final"] = rep.phi_full.back();
  r.results["phi_reduced_final"] = rep.phi_reduced.back();
  r.results["jumps_full"] = rep.jumps_full;
  r.results["jumps_reduced"] = rep.jumps_reduced;
  std::cout << "max |phi_full - phi_reduced| after tau=" << format_double(cc.transient_tau)
            << ": " << format_double(rep.max_abs_error) << '\n';
}

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> v;
  for (std::size_t i = 0; i < n; ++i)
    v.push_back(n == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  return v;
}

void cmd_winding_sweep(Run& r) {
  const auto& c = r.cfg;
  WindingOptions wo;
  wo.kappa = c.kappa;
  const auto res = winding_sweep(linspace(c.d_min, c.d_max, c.d_steps),
                                 linspace(c.f_min, c.f_max, c.f_steps), c.q0, c.q1,
                                 static_cast<unsigned>(c.workers), wo);
  auto f = r.open("winding.csv");
  CsvWriter w(f, {"d", "f", "rho", "class"});
  std::map<std::string, int> counts;
  for (const auto& x : res) {
    const std::string cls(to_string(x.cls));
    ++counts[cls];
    const std::vector<std::string> cells{format_double(x.d), format_double(x.f),
                                         format_double(x.rho), cls};
    w.text_row(cells);
  }
  r.results["class_counts"] = counts;
}

void cmd_network_reduced(Run& r) {
  const auto& c = r.cfg;
  const Model m = make_model(c);
  const double tau_end = horizon(c);
  const double dtau = c.dt > 0.0 ? c.dt : 0.01;
  const SlowSignal sig = make_signal(c, tau_end);
  std::vector<double> theta(c.count);
  GaussianSource g(c.seed);
  for (double& t : theta) t = 0.2 * g.uniform_open();
  NetworkOptions no;
  no.sigma = c.sigma;
  no.seed = c.seed;
  no.stride = stride_for(tau_end, dtau, 5000);
  const NetworkSeries ns = integrate_phase_network(theta, h_coefficients(c, m), sig, tau_end, dtau, no);
  auto f = r.open("network_reduced.csv");
  CsvWriter w(f, {"tau", "OP", "q"});
  for (std::size_t k = 0; k < ns.times.size(); ++k) w.row({ns.times[k], ns.order[k], ns.q[k]});
  r.results["order_max"] = *std::max_element(ns.order.begin(), ns.order.end());
  r.results["order_min"] = *std::min_element(ns.order.begin(), ns.order.end());
}

void cmd_network_full(Run& r) {
  const auto& c = r.cfg;
  if (!(c.eps > 0.0)) throw Error(Errc::configuration, "fullsim", "network-full needs eps > 0");
  const Model m = make_model(c);
  const double tau_end = horizon(c);
  const SlowSignal sig = make_signal(c, tau_end);
  NetworkConfig nc;
  nc.count = c.count;
  nc.eps = c.eps;
  nc.t_end = tau_end / c.eps;
  nc.dt = c.dt;
  nc.seed = c.seed;
  const double dt = c.dt > 0.0 ? c.dt : m.dt;
  nc.stride = std::max<std::size_t>(1, static_cast<std::size_t>(std::round(0.1 / dt)));
  const NetworkRun run = simulate_network_full(m, sig, nc);
  const double sample_dt = dt * static_cast<double>(nc.stride);
  // Window of a few fast cycles.
  const double window = c.model == "traub" ? 100.0 : 8.0 * two_pi;
  const auto var = windowed_variance(run.v_tot, sample_dt, window);
  {
    auto f = r.open("network_full.csv");
    write_network_csv(f, run, var);
  }
  auto f = r.open("spikes.csv");
  write_spikes_csv(f, run);
  r.results["variance_window"] = window;
}

void cmd_slow_passage(Run& r) {
  const auto& c = r.cfg;
  const Model m = make_model(c);
  const double tau_end = horizon(c);
  const double dtau = c.dt > 0.0 ? c.dt : 1e-3;
  const SlowSignal sig = make_signal(c, tau_end);
  // Perturb at the first interior maximum of q.
  const double tau_p = std::min(two_pi / c.f, 0.5 * tau_end);
  const std::vector<double> deltas{1e-10, 1e-8, 1e-4};
  const auto runs = perturbation_protocol(reduced_spec(c, m), sig, c.phi0, tau_p, deltas, tau_end,
                                          dtau, {}, stride_for(tau_end - tau_p, dtau, 5000));
  auto f = r.open("slow_passage.csv");
  CsvWriter w(f, {"delta", "jump_tau"});
  json jumps = json::array();
  for (const auto& run : runs) {
    w.row({run.delta, run.jump});
    jumps.push_back(std::isnan(run.jump) ? json(nullptr) : json(run.jump));
  }
  for (std::size_t i = 0; i < runs.size(); ++i) {
    auto g = r.open("slow_passage_" + std::to_string(i) + ".csv");
    write_phase_series(g, runs[i].series, sig);
  }
  r.results["tau_perturb"] = tau_p;
  r.results["jump_tau"] = jumps;
}

using Command = void (*)(Run&);

const std::map<std::string, Command>& commands() {
  static const std::map<std::string, Command> m{
      {"orbit", cmd_orbit},
      {"adjoint", cmd_adjoint},
      {"hfun", cmd_hfun},
      {"beta", cmd_beta},
      {"pair-reduced", cmd_pair_reduced},
      {"pair-full", cmd_pair_full},
      {"compare", cmd_compare},
      {"winding-sweep", cmd_winding_sweep},
      {"network-reduced", cmd_network_reduced},
      {"network-full", cmd_network_full},
      {"slow-passage", cmd_slow_passage},
  };
  return m;
}

void write_manifest(Run& r) {
  json j;
  j["tool"] = "phasemod";
  j["version"] = PHASEMOD_VERSION;
  j["subcommand"] = r.subcommand;
  if (!r.preset.empty()) j["preset"] = r.preset;
  const auto text = config_as_text(r.cfg);
  json params = json::object();
  for (const auto& [k, v] : text) {
    const auto it = r.source.find(k);
    params[k] = {{"value", v},
                 {"source", std::string(to_string(it == r.source.end() ? ValueSource::fallback
                                                                       : it->second))}};
  }
  j["parameters"] = params;
  j["seed"] = r.cfg.seed;
  j["outputs"] = r.outputs;
  j["results"] = r.results;
  std::ofstream f = open_output((r.dir / "manifest.json").string());
  f << j.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Phase models of slowly modulated coupled oscillators"};
  app.require_subcommand(1);
  app.set_version_flag("--version", PHASEMOD_VERSION);

  std::map<std::string, std::string> flag_values;
  std::map<std::string, CLI::Option*> flag_opts;
  std::string config_path;
  app.add_option("--config", config_path, "key = value file; flags override it");
  for (const auto& key : config_keys())
    flag_opts[key] = app.add_option("--" + key, flag_values[key]);

  const std::map<std::string, std::string> blurbs{
      {"orbit", "frozen limit cycle at q"},
      {"adjoint", "infinitesimal phase response curve at q"},
      {"hfun", "interaction function h, its odd part and Fourier fit"},
      {"beta", "frequency and drift coefficient over q"},
      {"pair-reduced", "reduced phase difference of a pair"},
      {"pair-full", "two coupled cells in the full model"},
      {"compare", "full vs reduced phase difference"},
      {"winding-sweep", "rotation numbers over a (d, f) grid"},
      {"network-reduced", "all-to-all phase network and order parameter"},
      {"network-full", "all-to-all network of full cells"},
  };
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, fn] : commands()) {
    if (name == "slow-passage") continue;
    subs[name] = app.add_subcommand(name, blurbs.at(name));
    subs[name]->fallthrough();
  }
  std::string preset_name;
  CLI::App* preset = app.add_subcommand("preset", "run a named figure configuration");
  preset->fallthrough();
  std::string preset_list;
  for (const auto& [name, p] : presets()) preset_list += "  " + name + ": " + p.note + "\n";
  preset->footer("Presets:\n" + preset_list);
  preset->add_option("name", preset_name)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_usage;
  }

  Run run;
  std::string module = "cli";
  try {
    if (const char* env = std::getenv("PHASEMOD_OUT"); env && *env) {
      run.cfg.out = env;
      run.source["out"] = ValueSource::environment;
    }
    if (*preset) {
      const auto it = presets().find(preset_name);
      if (it == presets().end()) {
        std::cerr << "unknown preset '" << preset_name << "'\n" << preset_list;
        return exit_usage;
      }
      run.preset = preset_name;
      run.subcommand = it->second.subcommand;
      for (const auto& [k, v] : it->second.values) {
        apply_config_value(run.cfg, k, v);
        run.source[k] = ValueSource::preset;
      }
    } else {
      for (const auto& [name, sub] : subs)
        if (*sub) run.subcommand = name;
    }
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw Error(Errc::configuration, "config", "cannot read " + config_path);
      for (const auto& [k, v] : parse_config(in)) {
        apply_config_value(run.cfg, k, v);
        run.source[k] = ValueSource::file;
      }
    }
    for (const auto& key : config_keys()) {
      if (flag_opts[key]->count() == 0) continue;
      apply_config_value(run.cfg, key, flag_values[key]);
      run.source[key] = ValueSource::flag;
    }
    validate(run.cfg);

    run.dir = fs::path(run.cfg.out);
    const auto out_src = run.source.find("out");
    const bool explicit_out = out_src != run.source.end() && (out_src->second == ValueSource::flag ||
                                                               out_src->second == ValueSource::file);
    if (!run.preset.empty() && !explicit_out) run.dir /= run.preset;
    std::error_code ec;
    fs::create_directories(run.dir, ec);
    if (ec) throw Error(Errc::configuration, "cli", "cannot create " + run.dir.string());

    module = run.subcommand;
    commands().at(run.subcommand)(run);
    write_manifest(run);
  } catch (const Error& e) {
    std::cerr << "phasemod " << (module.empty() ? "" : module + ": ") << e.what() << '\n';
    if (e.code() == Errc::configuration) return exit_config;
    std::cerr << "failing module: " << e.module() << '\n';
    return exit_runtime;
  } catch (const std::exception& e) {
    std::cerr << "phasemod " << module << ": " << e.what() << '\n';
    return exit_runtime;
  }
  return 0;
}
