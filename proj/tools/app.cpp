// Copyright 2026 The afcdepth Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "app.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "afc/depth_bound.hpp"
#include "afc/echo_analysis.hpp"
#include "afc/echo_sim.hpp"
#include "afc/errors.hpp"
#include "afc/io.hpp"
#include "afc/photon_stats.hpp"
#include "afc/spectroscopy.hpp"

#ifndef AFCDEPTH_VERSION
#define AFCDEPTH_VERSION "0.0.0"
#endif

namespace afcdepth {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

struct RunConfig {
  std::string subcommand;
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool subtract_background = false;
  bool deconvolve = false;
  std::optional<std::string> stats_model;
  std::optional<int> starts;
  std::vector<std::string> inputs;
};

/// Everything a subcommand needs besides its own config section.
struct Context {
  RunConfig cfg;
  json config = json::object();
  std::string config_text;
  fs::path config_dir = ".";
  std::string command;
  std::ostream* log = nullptr;
  int verbosity = 0;

  void info(const std::string& msg) const {
    if (verbosity >= 1 && log != nullptr) *log << "[afcdepth] " << msg << '\n';
  }
};

int log_verbosity() {
  const char* v = std::getenv("AFCDEPTH_LOG");
  if (v == nullptr) return 0;
  try {
    return std::stoi(v);
  } catch (const std::exception&) {
    return 0;
  }
}

const json& section(const json& root, const char* name) {
  if (root.is_object() && root.contains(name)) return root.at(name);
  return root;
}

template <typename T>
T value_or(const json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw afc::ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

template <typename T>
T required(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw afc::ConfigError(std::string("config key '") + key + "' is required");
  return value_or<T>(j, key, T{});
}

std::string resolve(const Context& ctx, const std::string& path) {
  const fs::path p(path);
  return p.is_absolute() ? p.string() : (ctx.config_dir / p).lexically_normal().string();
}

fs::path out_path(const Context& ctx, const std::string& name) { return fs::path(ctx.cfg.out_dir) / name; }

std::string input_hash(const Context& ctx, const std::vector<std::string>& files) {
  std::string blob = ctx.config_text;
  for (const auto& f : files) blob += '\0' + afc::read_text_file(f);
  return afc::hex64(afc::fnv1a64(blob));
}

afc::Provenance provenance(const Context& ctx, const std::string& hash) {
  afc::Provenance p;
  p.tool = "afcdepth";
  p.version = AFCDEPTH_VERSION;
  p.command = ctx.command;
  p.input_hash = hash;
  p.config = {{"seed", std::to_string(ctx.cfg.seed)},
              {"subtract_background", ctx.cfg.subtract_background ? "true" : "false"},
              {"deconvolve", ctx.cfg.deconvolve ? "true" : "false"}};
  if (ctx.cfg.stats_model) p.config.emplace_back("stats_model", *ctx.cfg.stats_model);
  if (ctx.cfg.starts) p.config.emplace_back("starts", std::to_string(*ctx.cfg.starts));
  return p;
}

json provenance_json(const afc::Provenance& p) {
  json j;
  j["tool"] = p.tool;
  j["version"] = p.version;
  j["command"] = p.command;
  j["input_hash"] = p.input_hash;
  json c = json::object();
  for (const auto& [k, v] : p.config) c[k] = v;
  j["config"] = c;
  return j;
}

void write_json(const Context& ctx, const std::string& name, const json& j) {
  afc::write_text_file(out_path(ctx, name).string(), j.dump(2) + "\n");
  ctx.info("wrote " + out_path(ctx, name).string());
}

void write_csv(const Context& ctx, const std::string& name, const afc::Provenance& p, const std::string& body) {
  afc::write_text_file(out_path(ctx, name).string(), afc::provenance_header(p) + body);
  ctx.info("wrote " + out_path(ctx, name).string());
}

std::string num(double x) { return std::isfinite(x) ? afc::format_double(x) : "nan"; }

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

// ---------------------------------------------------------------- simulate

afc::PhotonSpectrum photon_from(const json& j) {
  afc::PhotonSpectrum ph;
  ph.shape = afc::parse_photon_shape(value_or<std::string>(j, "shape", "flat"));
  ph.fwhm = value_or<double>(j, "fwhm_hz", 6e9);
  ph.center_offset = value_or<double>(j, "center_offset_hz", 0.0);
  return ph;
}

struct CombRecipe {
  double finesse = 0.0;  // 0: ideal comb
  double d1 = 1.0;
  double d0 = 0.0;
  afc::ToothShape shape = afc::ToothShape::gaussian;

  afc::CombSpec build(int N, double bandwidth) const {
    const double gamma = finesse > 0.0 ? bandwidth / N / finesse : 0.0;
    return afc::make_comb_with_teeth(N, bandwidth, gamma, d1, d0, shape);
  }
};

CombRecipe comb_recipe_from(const json& j) {
  CombRecipe r;
  r.finesse = value_or<double>(j, "finesse", 0.0);
  r.d1 = value_or<double>(j, "d1", 1.0);
  r.d0 = value_or<double>(j, "d0", 0.0);
  r.shape = afc::parse_tooth_shape(value_or<std::string>(j, "tooth_shape", "gaussian"));
  return r;
}

json run_simulate(const Context& ctx) {
  const json& s = section(ctx.config, "simulate");
  const afc::PhotonSpectrum photon = photon_from(value_or<json>(s, "photon", json::object()));
  const CombRecipe recipe = comb_recipe_from(value_or<json>(s, "comb", json::object()));
  const double bandwidth = value_or<double>(s, "bandwidth_hz", 6e9);
  const int samples = value_or<int>(s, "samples_per_period", afc::kDefaultSamplesPerPeriod);
  const double floor = value_or<double>(s, "noise_floor", 0.0);
  const auto teeth = value_or<std::vector<int>>(s, "teeth", {2, 9, 30, 100, 564});
  const auto prov = provenance(ctx, input_hash(ctx, {}));

  std::vector<afc::CombSpec> combs;
  for (int N : teeth) combs.push_back(recipe.build(N, bandwidth));
  const auto rows = afc::sweep_R_vs_N(combs, photon, samples, floor);
  std::ostringstream csv;
  csv << "N,bandwidth_hz,R,R_over_N\n";
  json table = json::array();
  for (const auto& r : rows) {
    csv << r.N << ',' << num(r.bandwidth) << ',' << num(r.R) << ',' << num(r.R / r.N) << '\n';
    table.push_back({{"N", r.N}, {"bandwidth_hz", r.bandwidth}, {"R", r.R}});
  }
  write_csv(ctx, "simulate_R_vs_N.csv", prov, csv.str());

  json result;
  result["provenance"] = provenance_json(prov);
  result["photon"] = {{"shape", afc::to_string(photon.shape)}, {"fwhm_hz", photon.fwhm}};
  result["comb"] = {{"finesse", recipe.finesse}, {"d1", recipe.d1}, {"d0", recipe.d0},
                    {"tooth_shape", afc::to_string(recipe.shape)}, {"bandwidth_hz", bandwidth}};
  result["noise_floor"] = floor;
  result["R_vs_N"] = table;

  if (s.contains("bandwidth_sweep")) {
    const json& b = s.at("bandwidth_sweep");
    const int N = value_or<int>(b, "teeth", 9);
    const auto bandwidths = required<std::vector<double>>(b, "bandwidths_hz");
    std::ostringstream bcsv;
    bcsv << "bandwidth_hz,N,R,R_over_N\n";
    json btable = json::array();
    for (double B : bandwidths) {
      const afc::CombSpec comb = recipe.build(N, B);
      const double R = afc::simulated_contrast(afc::absorb(comb, photon), comb, samples, floor);
      bcsv << num(B) << ',' << N << ',' << num(R) << ',' << num(R / N) << '\n';
      btable.push_back({{"bandwidth_hz", B}, {"N", N}, {"R", R}});
    }
    write_csv(ctx, "simulate_R_vs_bandwidth.csv", prov, bcsv.str());
    result["R_vs_bandwidth"] = btable;
  }

  if (s.contains("trace")) {
    const json& t = s.at("trace");
    const int N = value_or<int>(t, "teeth", 30);
    const double periods = value_or<double>(t, "periods", 1.5);
    const int intervals = value_or<int>(t, "intervals", 3000);
    const afc::CombSpec comb = recipe.build(N, bandwidth);
    const auto grid = afc::linear_grid(0.0, periods * comb.echo_time(), intervals);
    const auto trace = afc::emission_trace(afc::absorb(comb, photon), comb, grid);
    std::ostringstream tcsv;
    tcsv << "t_s,p\n";
    for (std::size_t i = 0; i < trace.times.size(); ++i) tcsv << num(trace.times[i]) << ',' << num(trace.p[i]) << '\n';
    write_csv(ctx, "simulate_trace.csv", prov, tcsv.str());
    result["trace"] = {{"teeth", N}, {"t_echo_s", trace.t_echo}, {"samples", trace.times.size()}};
  }
  write_json(ctx, "simulate.json", result);
  return result;
}

// ------------------------------------------------------------------ pstats

json run_pstats(const Context& ctx) {
  const json& s = section(ctx.config, "pstats");
  afc::ChannelModel ch;
  double sigma_mu = value_or<double>(s, "sigma_mu", 0.0);
  if (s.contains("mu")) {
    ch.mu = required<double>(s, "mu");
  } else if (s.contains("g2_ab")) {
    const double g2 = required<double>(s, "g2_ab");
    ch.mu = afc::estimate_mu_from_g2(g2);
    sigma_mu = ch.mu * value_or<double>(s, "sigma_g2_ab", 0.0) / g2;
  } else {
    throw afc::ConfigError("pstats: either mu or g2_ab is required");
  }

  if (s.contains("rates")) {
    const json& r = s.at("rates");
    afc::CountRates rates;
    rates.C_ab = required<double>(r, "C_ab");
    rates.S_a = required<double>(r, "S_a");
    rates.S_b = required<double>(r, "S_b");
    rates.eta_Db = value_or<double>(r, "eta_Db", 1.0);
    const auto etas = afc::estimate_etas(rates);
    ch.eta_a = etas.eta_a;
    ch.eta_b = etas.eta_b_star * required<double>(s, "eta_ci");
  } else {
    ch.eta_a = required<double>(s, "eta_a");
    ch.eta_b = required<double>(s, "eta_b");
  }

  // Write efficiency from the effective depth d1/F; an eta_w entry is
  // converted to the equivalent depth at F = 1.
  double d1 = 0.0;
  double finesse = 1.0;
  if (s.contains("d1")) {
    d1 = required<double>(s, "d1");
    finesse = required<double>(s, "finesse");
  } else {
    const double eta_w = required<double>(s, "eta_w");
    if (!(eta_w >= 0.0 && eta_w < 1.0)) throw afc::ConfigError("pstats: eta_w must lie in [0, 1)");
    d1 = -std::log1p(-eta_w);
  }
  ch.eta_w = afc::write_efficiency(d1, finesse);
  ch.eta_t = required<double>(s, "eta_t");
  ch.stats = afc::parse_stats_model(ctx.cfg.stats_model.value_or(value_or<std::string>(s, "stats_model", "thermal")));
  const double sigma_d1 = value_or<double>(s, "sigma_d1_rel", 0.1) * d1;
  const int r_max = value_or<int>(s, "r_max", 3);

  const auto probs = afc::excitation_probabilities(ch, std::max(r_max, 2));
  const auto unc = afc::propagate_uncertainty(ch, sigma_mu, d1, finesse, sigma_d1);

  json result;
  result["provenance"] = provenance_json(provenance(ctx, input_hash(ctx, {})));
  result["model"] = {{"stats_model", afc::to_string(ch.stats)}, {"mu", ch.mu},           {"sigma_mu", sigma_mu},
                     {"eta_a", ch.eta_a},                       {"eta_b", ch.eta_b},     {"eta_w", ch.eta_w},
                     {"eta_t", ch.eta_t},                       {"effective_depth", d1 / finesse}};
  result["P"] = probs.p;
  result["P1"] = unc.P1;
  result["sigma_P1"] = unc.sigma_P1;
  result["P2"] = unc.P2;
  result["sigma_P2"] = unc.sigma_P2;
  result["truncation_error"] = probs.truncation_error;
  result["series_terms"] = probs.terms;

  const auto trials = value_or<long long>(s, "monte_carlo_trials", 0);
  if (trials > 0) {
    const int workers = value_or<int>(s, "monte_carlo_workers", 4);
    const auto tally = afc::monte_carlo_excitations(ch, trials, ctx.cfg.seed, r_max, workers);
    long long accepted = 0;
    for (long long c : tally.counts) accepted += c;
    json est = json::array();
    for (long long c : tally.counts) est.push_back(accepted > 0 ? static_cast<double>(c) / accepted : 0.0);
    result["monte_carlo"] = {{"trials", tally.trials},   {"heralded", tally.heralded}, {"accepted", accepted},
                             {"counts", tally.counts},   {"P", est},                   {"workers", workers},
                             {"seed", ctx.cfg.seed}};
  }
  write_json(ctx, "pstats.json", result);
  return result;
}

// ----------------------------------------------------------------- analyze

struct HistogramInput {
  std::string label;
  std::string csv;
  std::string sidecar;
};

std::string sidecar_for(const std::string& csv) {
  fs::path p(csv);
  p.replace_extension(".json");
  return p.string();
}

std::vector<HistogramInput> histogram_inputs(const Context& ctx, const json& s) {
  std::vector<HistogramInput> out;
  for (const auto& h : value_or<json>(s, "histograms", json::array())) {
    HistogramInput in;
    in.csv = resolve(ctx, required<std::string>(h, "csv"));
    in.sidecar = h.contains("sidecar") ? resolve(ctx, required<std::string>(h, "sidecar")) : sidecar_for(in.csv);
    in.label = value_or<std::string>(h, "label", fs::path(in.csv).stem().string());
    out.push_back(in);
  }
  for (const auto& path : ctx.cfg.inputs) {
    out.push_back({fs::path(path).stem().string(), path, sidecar_for(path)});
  }
  if (out.empty()) throw afc::ConfigError("analyze: no histograms given");
  return out;
}

json contrast_json(const afc::Contrast& c) { return {{"R", c.R}, {"sigma_R", c.sigma_R}}; }

struct AnalyzeOutcome {
  json report;
  std::vector<afc::SweepRow> rows;
  std::vector<std::optional<afc::Contrast>> selected;
};

AnalyzeOutcome analyze(const Context& ctx, const json& s) {
  const auto inputs = histogram_inputs(ctx, s);
  std::vector<afc::TimeHistogram> hists;
  std::vector<std::string> labels;
  std::vector<std::string> files;
  const std::optional<double> detector =
      s.is_object() && s.contains("detector_fwhm") ? std::optional(required<double>(s, "detector_fwhm")) : std::nullopt;
  for (const auto& in : inputs) {
    hists.push_back(afc::load_histogram(in.csv, in.sidecar));
    if (detector) hists.back().detector_fwhm = *detector;
    labels.push_back(in.label);
    files.push_back(in.csv);
    files.push_back(in.sidecar);
  }
  ctx.info("fitting " + std::to_string(hists.size()) + " histogram(s)");
  AnalyzeOutcome res;
  res.rows = afc::contrast_vs_param_sweep(hists, labels);
  const auto prov = provenance(ctx, input_hash(ctx, files));

  std::ostringstream csv;
  csv << "label,ok,E,sigma_E,t0_s,fwhm_s,sigma_fwhm_s,background,sigma_background,A,R_raw,sigma_R_raw,"
         "R_subtracted,sigma_R_subtracted,R_deconvolved,sigma_R_deconvolved,R,sigma_R\n";
  json rows = json::array();
  for (std::size_t i = 0; i < res.rows.size(); ++i) {
    const auto& r = res.rows[i];
    json row;
    row["label"] = r.label;
    row["ok"] = r.ok;
    std::optional<afc::Contrast> sel;
    if (r.ok) {
      try {
        sel = afc::echo_contrast(r.fit, {ctx.cfg.subtract_background, ctx.cfg.deconvolve, hists[i].detector_fwhm});
      } catch (const std::exception& e) {
        row["error"] = e.what();
      }
      const auto& f = r.fit;
      row["fit"] = {{"E", f.E},
                    {"sigma_E", f.sigma_E()},
                    {"t0_s", f.t0},
                    {"fwhm_s", f.fwhm},
                    {"sigma_fwhm_s", f.sigma_fwhm()},
                    {"offset", f.offset},
                    {"background_rate", f.background_rate},
                    {"background_sigma", f.background_sigma},
                    {"A", f.A},
                    {"A_sigma", f.A_sigma},
                    {"A_bins", f.A_bins},
                    {"chi2_per_dof", f.chi2_per_dof},
                    {"iterations", f.iterations}};
      row["contrast"] = {{"raw", contrast_json(r.raw)},
                         {"subtracted", contrast_json(r.subtracted)},
                         {"deconvolved", contrast_json(r.deconvolved)}};
      row["selected"] = sel ? contrast_json(*sel) : json(nullptr);
      csv << r.label << ",1," << num(f.E) << ',' << num(f.sigma_E()) << ',' << num(f.t0) << ',' << num(f.fwhm)
          << ',' << num(f.sigma_fwhm()) << ',' << num(f.background_rate) << ',' << num(f.background_sigma) << ','
          << num(f.A) << ',' << num(r.raw.R) << ',' << num(r.raw.sigma_R) << ',' << num(r.subtracted.R) << ','
          << num(r.subtracted.sigma_R) << ',' << num(r.deconvolved.R) << ',' << num(r.deconvolved.sigma_R) << ','
          << num(sel ? sel->R : NAN) << ',' << num(sel ? sel->sigma_R : NAN) << '\n';
    } else {
      row["error"] = r.error;
      csv << r.label << ",0";
      for (int k = 0; k < 16; ++k) csv << ",nan";
      csv << '\n';
    }
    res.selected.push_back(sel);
    rows.push_back(row);
  }
  write_csv(ctx, "analyze.csv", prov, csv.str());

  res.report["provenance"] = provenance_json(prov);
  res.report["corrections"] = {{"subtract_background", ctx.cfg.subtract_background},
                               {"deconvolve", ctx.cfg.deconvolve}};
  res.report["rows"] = rows;
  write_json(ctx, "analyze.json", res.report);
  return res;
}

json run_analyze(const Context& ctx) { return analyze(ctx, section(ctx.config, "analyze")).report; }

// ------------------------------------------------------------------- bound

afc::SolverOptions solver_options(const Context& ctx, const json& s) {
  afc::SolverOptions o;
  o.random_starts = ctx.cfg.starts.value_or(value_or<int>(s, "starts", o.random_starts));
  o.seed = ctx.cfg.seed;
  if (o.random_starts < 0) throw afc::ConfigError("starts must be non-negative");
  return o;
}

json solver_json(const afc::MaxRResult& r, int N, int M) {
  json j;
  j["R"] = r.R;
  j["constraint_residual"] = r.constraint_residual;
  j["active_constraints"] = r.active_constraints;
  j["depth_unconstrained"] = r.depth_unconstrained;
  j["starts"] = r.starts.size();
  j["converged_starts"] = r.converged_starts;
  json support = json::array();
  if (!r.depth_unconstrained && r.state.q.size() > 0) {
    const afc::BlockFamily family(N, M);
    for (Eigen::Index t = 0; t < r.state.q.size(); ++t) {
      if (r.state.q[t] <= 0.0) continue;
      support.push_back({{"member", family.describe(static_cast<int>(t))},
                         {"q", r.state.q[t]},
                         {"beta_sq", r.state.beta_sq[t]}});
    }
  }
  j["support"] = support;
  return j;
}

json certify(const Context& ctx, const json& s, double R, double sigma_R, double P1, double P2) {
  const int N = required<int>(s, "N");
  const auto opts = solver_options(ctx, s);
  ctx.info("certifying depth with " + std::to_string(opts.random_starts) + " random starts");
  const auto res = afc::certify_depth(R, sigma_R, N, P1, P2, opts);
  json j;
  j["inputs"] = {{"R", R}, {"sigma_R", sigma_R}, {"N", N}, {"P1", P1}, {"P2", P2}};
  j["M_lower"] = res.M_lower;
  j["M_lower_minus"] = res.M_lower_minus;
  j["M_lower_plus"] = res.M_lower_plus;
  j["R_max_at_M"] = res.R_max_at_M;
  j["R_max_below"] = res.R_max_below ? json(*res.R_max_below) : json(nullptr);
  j["linear_estimate"] = res.linear_estimate;
  j["max_R_calls"] = res.max_R_calls;
  j["random_starts"] = opts.random_starts;
  j["solver"] = solver_json(res.solver, N, std::min(res.M_lower, N));
  return j;
}

/// Writes the (M, max_R) curves when the config asks for them.
std::optional<json> bound_curves(const Context& ctx, const json& s, double P1, double P2) {
  if (!s.is_object() || !s.contains("curve")) return std::nullopt;
  const json& c = s.at("curve");
  const int N = required<int>(s, "N");
  std::vector<int> Ms = value_or<std::vector<int>>(c, "M", {});
  if (Ms.empty()) {
    const int step = value_or<int>(c, "M_step", 25);
    const int top = value_or<int>(c, "M_max", N);
    if (step < 1) throw afc::ConfigError("curve.M_step must be positive");
    Ms.push_back(1);
    for (int M = step; M <= top; M += step) Ms.push_back(M);
  }
  const auto P2s = value_or<std::vector<double>>(c, "P2_values", {P2});
  const auto opts = solver_options(ctx, s);
  std::vector<std::vector<afc::CurvePoint>> curves;
  for (double p2 : P2s) {
    ctx.info("bound curve at P2 = " + num(p2));
    curves.push_back(afc::bound_curve(N, P1, p2, Ms, opts));
  }
  std::ostringstream csv;
  csv << "M";
  for (double p2 : P2s) csv << ",max_R_P2=" << num(p2);
  csv << '\n';
  for (std::size_t i = 0; i < Ms.size(); ++i) {
    csv << Ms[i];
    for (const auto& curve : curves) csv << ',' << num(curve[i].max_R);
    csv << '\n';
  }
  write_csv(ctx, "bound_curve.csv", provenance(ctx, input_hash(ctx, {})), csv.str());
  json j;
  j["N"] = N;
  j["P1"] = P1;
  j["M"] = Ms;
  json series = json::array();
  for (std::size_t k = 0; k < P2s.size(); ++k) {
    json vals = json::array();
    for (const auto& pt : curves[k]) vals.push_back(finite_or_null(pt.max_R));
    series.push_back({{"P2", P2s[k]}, {"max_R", vals}});
  }
  j["curves"] = series;
  return j;
}

json run_bound(const Context& ctx) {
  const json& s = section(ctx.config, "bound");
  const double P1 = required<double>(s, "P1");
  const double P2 = required<double>(s, "P2");
  json result;
  result["provenance"] = provenance_json(provenance(ctx, input_hash(ctx, {})));
  if (s.contains("R")) {
    const auto c = certify(ctx, s, required<double>(s, "R"), value_or<double>(s, "sigma_R", 0.0), P1, P2);
    for (const auto& [k, v] : c.items()) result[k] = v;
  }
  if (auto curves = bound_curves(ctx, s, P1, P2)) result["curve"] = *curves;
  if (!s.contains("R") && !s.contains("curve")) throw afc::ConfigError("bound: nothing to do (need R or curve)");
  write_json(ctx, "bound.json", result);
  return result;
}

// ------------------------------------------------------------------- atoms

afc::KeyValues key_values_from(const json& j) {
  std::ostringstream os;
  for (const auto& [k, v] : j.items()) {
    if (v.is_string()) {
      os << k << " = " << v.get<std::string>() << '\n';
    } else if (v.is_number()) {
      os << k << " = " << afc::format_double(v.get<double>()) << '\n';
    } else {
      throw afc::ConfigError("atoms: key '" + k + "' must be a string or number");
    }
  }
  return afc::KeyValues::parse(os.str());
}

json run_atoms(const Context& ctx) {
  afc::KeyValues kv;
  if (ctx.config.is_object() && !ctx.config.empty()) {
    kv = key_values_from(section(ctx.config, "atoms"));
  } else if (!ctx.config_text.empty()) {
    kv = afc::KeyValues::parse(ctx.config_text);
  }
  if (!kv.has("preset") && !kv.has("n_d")) {
    std::string text = "preset = tm_linbo3\n";
    for (const auto& [k, v] : kv.entries()) text += k + " = " + v + "\n";
    kv = afc::KeyValues::parse(text);
  }
  const afc::MaterialParams mat = afc::load_material(kv);
  const double theta_t = kv.get_double("theta_t", 4.3 * afc::units::MHz);
  const auto convention = afc::parse_prefactor_convention(kv.get_string("convention", "reported"));
  const double theta_i = afc::integrated_absorption(mat);
  const double n1 = afc::atoms_per_tooth_absorption(mat, theta_t, theta_i);
  const double n2 = afc::atoms_per_tooth_singleion(mat, theta_t, convention);

  json result;
  result["provenance"] = provenance_json(provenance(ctx, input_hash(ctx, {})));
  result["material"] = {{"n_d_per_cm3", mat.n_d}, {"n", mat.n},           {"Gamma_h_hz", mat.Gamma_h},
                        {"gamma_s_hz", mat.gamma_s}, {"alpha_integral_per_cm2", mat.alpha_integral},
                        {"L_cm", mat.L},           {"A_cm2", mat.A},       {"nu_hz", mat.nu}};
  result["theta_t_hz"] = theta_t;
  result["theta_i_hz"] = theta_i;
  result["convention"] = afc::to_string(convention);
  result["d_atom"] = afc::single_atom_depth(mat, convention);
  result["atoms_per_tooth_absorption"] = n1;
  result["atoms_per_tooth_singleion"] = n2;
  result["singleion_by_convention"] = {
      {"reported", afc::atoms_per_tooth_singleion(mat, theta_t, afc::PrefactorConvention::reported)},
      {"as_printed", afc::atoms_per_tooth_singleion(mat, theta_t, afc::PrefactorConvention::as_printed)}};
  result["estimator_ratio"] = n2 / n1;
  write_json(ctx, "atoms.json", result);
  return result;
}

// ---------------------------------------------------------------- pipeline

json run_pipeline(const Context& ctx) {
  if (!ctx.config.is_object()) throw afc::ConfigError("pipeline: a JSON config is required");
  const json pstats = run_pstats(ctx);
  const json& as = section(ctx.config, "analyze");
  const AnalyzeOutcome analysis = analyze(ctx, as);

  const json& bs = section(ctx.config, "bound");
  const std::string label = value_or<std::string>(bs, "label", analysis.rows.front().label);
  std::optional<afc::Contrast> chosen;
  for (std::size_t i = 0; i < analysis.rows.size(); ++i) {
    if (analysis.rows[i].label == label) chosen = analysis.selected[i];
  }
  if (!chosen) throw afc::DomainError("pipeline: no usable contrast for histogram '" + label + "'");

  const double P1 = pstats.at("P1").get<double>();
  const double P2 = pstats.at("P2").get<double>();
  json bound;
  bound["provenance"] = provenance_json(provenance(ctx, input_hash(ctx, {})));
  const json cert = certify(ctx, bs, chosen->R, chosen->sigma_R, P1, P2);
  for (const auto& [k, v] : cert.items()) bound[k] = v;
  if (auto curves = bound_curves(ctx, bs, P1, P2)) bound["curve"] = *curves;
  write_json(ctx, "bound.json", bound);

  json result;
  result["provenance"] = provenance_json(provenance(ctx, input_hash(ctx, {})));
  result["pstats"] = {{"P1", P1},
                      {"sigma_P1", pstats.at("sigma_P1")},
                      {"P2", P2},
                      {"sigma_P2", pstats.at("sigma_P2")}};
  json contrasts = json::object();
  for (std::size_t i = 0; i < analysis.rows.size(); ++i) {
    const auto& r = analysis.rows[i];
    contrasts[r.label] = r.ok ? json{{"raw", contrast_json(r.raw)},
                                     {"subtracted", contrast_json(r.subtracted)},
                                     {"deconvolved", contrast_json(r.deconvolved)}}
                              : json{{"error", r.error}};
  }
  result["analyze"] = {{"label", label}, {"R", chosen->R}, {"sigma_R", chosen->sigma_R}, {"rows", contrasts}};
  result["bound"] = {{"M_lower", bound.at("M_lower")},
                     {"M_lower_minus", bound.at("M_lower_minus")},
                     {"M_lower_plus", bound.at("M_lower_plus")},
                     {"R_max_at_M", bound.at("R_max_at_M")},
                     {"linear_estimate", bound.at("linear_estimate")}};
  write_json(ctx, "pipeline.json", result);
  return result;
}

// -------------------------------------------------------------------- main

std::string command_line(const RunConfig& cfg) {
  std::ostringstream os;
  os << cfg.subcommand;
  if (!cfg.config_path.empty()) os << " --config " << fs::path(cfg.config_path).filename().string();
  os << " --seed " << cfg.seed;
  if (cfg.subtract_background) os << " --subtract-background";
  if (cfg.deconvolve) os << " --deconvolve";
  if (cfg.stats_model) os << " --stats-model " << *cfg.stats_model;
  if (cfg.starts) os << " --starts " << *cfg.starts;
  for (const auto& in : cfg.inputs) os << ' ' << fs::path(in).filename().string();
  return os.str();
}

Context make_context(const RunConfig& cfg, std::ostream& err) {
  Context ctx;
  ctx.cfg = cfg;
  ctx.log = &err;
  ctx.verbosity = log_verbosity();
  ctx.command = command_line(cfg);
  if (!cfg.config_path.empty()) {
    ctx.config_text = afc::read_text_file(cfg.config_path);
    ctx.config_dir = fs::path(cfg.config_path).parent_path();
    if (ctx.config_dir.empty()) ctx.config_dir = ".";
    const bool is_json = fs::path(cfg.config_path).extension() == ".json";
    if (is_json) {
      try {
        ctx.config = json::parse(ctx.config_text);
      } catch (const json::exception& e) {
        throw afc::ConfigError(cfg.config_path + ": " + e.what());
      }
    } else if (cfg.subcommand != "atoms") {
      throw afc::ConfigError(cfg.subcommand + ": config must be a .json file");
    }
  } else if (cfg.subcommand == "pstats" || cfg.subcommand == "bound" || cfg.subcommand == "pipeline") {
    throw afc::ConfigError(cfg.subcommand + ": --config is required");
  }
  return ctx;
}

json dispatch(const Context& ctx) {
  const auto& sub = ctx.cfg.subcommand;
  if (sub == "simulate") return run_simulate(ctx);
  if (sub == "pstats") return run_pstats(ctx);
  if (sub == "analyze") return run_analyze(ctx);
  if (sub == "bound") return run_bound(ctx);
  if (sub == "atoms") return run_atoms(ctx);
  return run_pipeline(ctx);
}

void report_error(std::ostream& err, const std::string& kind, const std::string& message) {
  json j;
  j["status"] = "error";
  j["kind"] = kind;
  j["message"] = message;
  err << j.dump() << '\n';
}

/// Short human summary of a result on stdout.
void summarize(std::ostream& out, const std::string& sub, const json& r) {
  out << "afcdepth " << sub << ": ok";
  if (sub == "bound" && r.contains("M_lower")) {
    out << " M_lower=" << r.at("M_lower") << " [" << r.at("M_lower_minus") << ", " << r.at("M_lower_plus") << "]";
  } else if (sub == "pipeline") {
    out << " R=" << r.at("analyze").at("R") << " M_lower=" << r.at("bound").at("M_lower");
  } else if (sub == "pstats") {
    out << " P1=" << r.at("P1") << " P2=" << r.at("P2");
  } else if (sub == "atoms") {
    out << " N1=" << r.at("atoms_per_tooth_absorption") << " N2=" << r.at("atoms_per_tooth_singleion");
  }
  out << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Entanglement depth certification for atomic frequency comb memories", "afcdepth"};
  app.set_version_flag("--version", AFCDEPTH_VERSION);
  app.require_subcommand(1);
  app.fallthrough();
  RunConfig cfg;
  std::string stats_model;
  int starts = -1;
  app.add_option("--config", cfg.config_path, "Configuration file (JSON; key-value for atoms)");
  app.add_option("--out", cfg.out_dir, "Output directory")->capture_default_str();
  app.add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
  app.add_flag("--subtract-background", cfg.subtract_background, "Subtract the pre-herald background");
  app.add_flag("--deconvolve", cfg.deconvolve, "Correct the echo amplitude for detector jitter");
  app.add_option("--stats-model", stats_model, "Pair statistics")->check(CLI::IsMember({"thermal", "poisson"}));
  app.add_option("--starts", starts, "Random solver starts per depth")->check(CLI::NonNegativeNumber);

  const std::vector<std::pair<std::string, std::string>> subs = {
      {"simulate", "Simulate comb echoes and contrast tables"},
      {"pstats", "Photon-number statistics of the stored light"},
      {"analyze", "Fit echo histograms and compute contrasts"},
      {"bound", "Certify the entanglement depth and compute bound curves"},
      {"atoms", "Atoms per comb tooth"},
      {"pipeline", "pstats, analyze and bound in sequence"}};
  for (const auto& [name, help] : subs) {
    auto* sc = app.add_subcommand(name, help);
    if (name == "analyze" || name == "pipeline") sc->add_option("inputs", cfg.inputs, "Histogram CSV files");
    sc->callback([&cfg, n = name] { cfg.subcommand = n; });
  }

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << AFCDEPTH_VERSION << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    report_error(err, "ConfigError", e.what());
    return kExitConfigError;
  }
  if (!stats_model.empty()) cfg.stats_model = stats_model;
  if (starts >= 0) cfg.starts = starts;

  try {
    const Context ctx = make_context(cfg, err);
    const json result = dispatch(ctx);
    summarize(out, cfg.subcommand, result);
    return kExitOk;
  } catch (const afc::ConfigError& e) {
    report_error(err, "ConfigError", e.what());
    return kExitConfigError;
  } catch (const json::exception& e) {
    report_error(err, "ConfigError", e.what());
    return kExitConfigError;
  } catch (const afc::DomainError& e) {
    report_error(err, "DomainError", e.what());
  } catch (const afc::InfeasibleError& e) {
    report_error(err, "InfeasibleError", e.what());
  } catch (const afc::InconsistentError& e) {
    report_error(err, "InconsistentError", e.what());
  } catch (const afc::LowSignalError& e) {
    report_error(err, "LowSignalError", e.what());
  } catch (const afc::NumericError& e) {
    report_error(err, "NumericError", e.what());
  } catch (const std::exception& e) {
    report_error(err, "Error", e.what());
  }
  return kExitModuleError;
}

}  // namespace afcdepth
