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


// Regenerates the bundled synthetic histograms, the pipeline config and
// the fixture manifest.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <string>

#include "afc/echo_analysis.hpp"
#include "afc/echo_fixtures.hpp"
#include "afc/io.hpp"

namespace {

namespace fs = std::filesystem;
namespace fx = afc::fixtures;
using json = nlohmann::ordered_json;

json describe(const afc::SyntheticEcho& s) {
  const double factor = afc::deconvolution_factor(s.observed_fwhm(), s.detector_fwhm);
  const double sub = fx::true_subtracted_contrast(s);
  return {{"bin_width", s.bin_width},
          {"bins", s.bins},
          {"herald_index", s.herald_index},
          {"storage_time", s.storage_time},
          {"background", s.background},
          {"echo_area", s.echo_area},
          {"echo_fwhm", s.echo_fwhm},
          {"observed_fwhm", s.observed_fwhm()},
          {"detector_fwhm", s.detector_fwhm},
          {"peak", s.observed_peak()},
          {"truth",
           {{"R_raw", fx::true_raw_contrast(s)},
            {"R_subtracted", sub},
            {"R_deconvolved", sub * factor},
            {"deconvolution_factor", factor}}}};
}

void emit(const fs::path& dir, const std::string& name, const afc::SyntheticEcho& spec, json& manifest) {
  const afc::TimeHistogram h = afc::rounded_histogram(spec);
  afc::write_text_file((dir / (name + ".csv")).string(), afc::histogram_csv(h));
  afc::write_text_file((dir / (name + ".json")).string(), afc::histogram_sidecar(h));
  json entry = describe(spec);
  entry["csv"] = name + ".csv";
  entry["sidecar"] = name + ".json";
  manifest["histograms"][name] = entry;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Write the synthetic echo fixtures", "afc_make_fixtures"};
  std::string out = "tests/fixtures";
  app.add_option("--out", out, "Fixture directory")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  const fs::path dir(out);
  json manifest;
  manifest["description"] = "Synthetic detection histograms with error-diffused rounding of the expected counts";
  manifest["histograms"] = json::object();
  emit(dir, "headline", fx::headline_spec(), manifest);
  json sweep = json::array();
  for (int N : fx::kSweepTeeth) {
    emit(dir, fx::sweep_name(N), fx::sweep_spec(N), manifest);
    sweep.push_back({{"N", N}, {"name", fx::sweep_name(N)}});
  }
  manifest["sweep"] = sweep;
  manifest["sweep_expectation"] = {{"argmax_N", 408}, {"R_raw_peak", 70.6}, {"tolerance", 1.4}};
  manifest["pipeline_expectation"] = {{"label", "headline"},
                                      {"P1", 3.5e-3},
                                      {"P1_rel_tol", 0.02},
                                      {"P2", 2.55e-8},
                                      {"P2_rel_tol", 0.1},
                                      {"R_sigma_tol", 2.0},
                                      {"M_lower_range", {218, 240}}};
  afc::write_text_file((dir / "manifest.json").string(), manifest.dump(2) + "\n");

  json pipeline;
  pipeline["pstats"] = {{"mu", 1.1e-3}, {"sigma_mu", 1e-4}, {"eta_a", 0.11},       {"eta_b", 0.0106},
                        {"eta_w", 0.33}, {"eta_t", 0.36},    {"sigma_d1_rel", 0.1}, {"stats_model", "thermal"}};
  pipeline["analyze"] = {{"histograms", {{{"label", "headline"}, {"csv", "headline.csv"}}}}};
  pipeline["bound"] = {{"label", "headline"}, {"N", 564}};
  afc::write_text_file((dir / "pipeline.json").string(), pipeline.dump(2) + "\n");

  json sweep_cfg;
  json hs = json::array();
  for (int N : fx::kSweepTeeth) hs.push_back({{"label", "N" + std::to_string(N)}, {"csv", fx::sweep_name(N) + ".csv"}});
  sweep_cfg["analyze"] = {{"histograms", hs}};
  afc::write_text_file((dir / "sweep.json").string(), sweep_cfg.dump(2) + "\n");
  std::cout << "wrote fixtures to " << dir.string() << '\n';
  return 0;
}
