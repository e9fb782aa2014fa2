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

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "app.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const std::string kFixtures = AFC_FIXTURE_DIR;

struct RunResult {
  int code = 0;
  std::string out;
  std::string err;
};

RunResult invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = afcdepth::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("afcdepth_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
  return p;
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(invoke({}).code == afcdepth::kExitConfigError);
  CHECK(invoke({"frobnicate"}).code == afcdepth::kExitConfigError);
  CHECK(invoke({"--stats-model", "bose", "pstats"}).code == afcdepth::kExitConfigError);
  const auto missing = invoke({"bound"});
  CHECK(missing.code == afcdepth::kExitConfigError);
  const json e = json::parse(missing.err);
  CHECK(e.at("status") == "error");
  CHECK(e.at("kind") == "ConfigError");

  const auto dir = scratch("bad");
  const auto cfg = write_file(dir / "broken.json", "{ not json");
  CHECK(invoke({"--config", cfg.string(), "--out", dir.string(), "bound"}).code == afcdepth::kExitConfigError);
  const auto incomplete = write_file(dir / "incomplete.json", R"({"bound": {"R": 10}})");
  CHECK(invoke({"--config", incomplete.string(), "--out", dir.string(), "bound"}).code == afcdepth::kExitConfigError);
}

TEST_CASE("help and version exit with 0") {
  const auto h = invoke({"--help"});
  CHECK(h.code == afcdepth::kExitOk);
  CHECK(h.out.find("pipeline") != std::string::npos);
  CHECK(invoke({"--version"}).code == afcdepth::kExitOk);
}

TEST_CASE("module errors exit with 1") {
  const auto dir = scratch("module");
  const auto cfg = write_file(dir / "c.json", R"({"R": 600, "sigma_R": 1, "N": 564, "P1": 3.5e-3, "P2": 2.6e-8})");
  const auto r = invoke({"--config", cfg.string(), "--out", dir.string(), "--starts", "2", "bound"});
  CHECK(r.code == afcdepth::kExitModuleError);
  CHECK(json::parse(r.err).at("kind") == "DomainError");

  const auto bad_mu = write_file(dir / "p.json", R"({"pstats": {"mu": -1, "eta_a": 0.1, "eta_b": 0.1, "eta_w": 0.3, "eta_t": 0.3}})");
  CHECK(invoke({"--config", bad_mu.string(), "--out", dir.string(), "pstats"}).code == afcdepth::kExitModuleError);
}

TEST_CASE("bound on the headline numbers") {
  const auto dir = scratch("bound");
  const auto cfg = write_file(dir / "headline.json", R"({"R": 256.7, "sigma_R": 8.7, "N": 564, "P1": 3.5e-3, "P2": 2.6e-8})");
  const auto r = invoke({"--config", cfg.string(), "--out", dir.string(), "--starts", "20", "bound"});
  REQUIRE(r.code == 0);
  const json j = json::parse(slurp(dir / "bound.json"));
  CHECK(j.at("M_lower").get<int>() >= 218);
  CHECK(j.at("M_lower").get<int>() <= 240);
  CHECK(j.at("linear_estimate").get<double>() == doctest::Approx(219.954).epsilon(1e-4));
  CHECK(j.contains("provenance"));
  CHECK(j.at("provenance").at("tool") == "afcdepth");
}

TEST_CASE("simulate an ideal nine-tooth comb") {
  const auto dir = scratch("simulate");
  const auto cfg = write_file(dir / "sim.json", R"({"simulate": {"teeth": [9], "comb": {"finesse": 0},
    "photon": {"shape": "flat", "fwhm_hz": 12e9}, "samples_per_period": 2000}})");
  const auto r = invoke({"--config", cfg.string(), "--out", dir.string(), "simulate"});
  REQUIRE(r.code == 0);
  const std::string csv = slurp(dir / "simulate_R_vs_N.csv");
  CHECK(csv.rfind("# ", 0) == 0);
  std::istringstream in(csv);
  std::string line, last;
  while (std::getline(in, line)) last = line;
  std::istringstream row(last);
  std::string n, b, R;
  std::getline(row, n, ',');
  std::getline(row, b, ',');
  std::getline(row, R, ',');
  CHECK(n == "9");
  CHECK(std::stod(R) == doctest::Approx(9.0).epsilon(1e-6));
}

TEST_CASE("atoms with the default preset") {
  const auto dir = scratch("atoms");
  const auto r = invoke({"--out", dir.string(), "atoms"});
  REQUIRE(r.code == 0);
  const json j = json::parse(slurp(dir / "atoms.json"));
  CHECK(j.at("atoms_per_tooth_absorption").get<double>() == doctest::Approx(1.1e9).epsilon(0.1));
  CHECK(j.at("atoms_per_tooth_singleion").get<double>() == doctest::Approx(1.7e9).epsilon(0.1));
}

TEST_CASE("analyze the bundled headline histogram") {
  const auto dir = scratch("analyze");
  const auto r = invoke({"--out", dir.string(), "--subtract-background", "analyze", kFixtures + "/headline.csv"});
  REQUIRE(r.code == 0);
  const json j = json::parse(slurp(dir / "analyze.json"));
  CHECK(fs::exists(dir / "analyze.csv"));
  CHECK(slurp(dir / "analyze.csv").find("R_deconvolved") != std::string::npos);
  const json& row = j.at("rows").at(0);
  CHECK(row.at("ok") == true);
  CHECK(row.at("selected").at("R").get<double>() == doctest::Approx(127.6).epsilon(0.01));
}

TEST_CASE("pipeline reproduces the fixture expectations and is deterministic") {
  const json manifest = json::parse(slurp(fs::path(kFixtures) / "manifest.json"));
  const json& expect = manifest.at("pipeline_expectation");
  const auto a = scratch("pipe_a");
  const auto b = scratch("pipe_b");
  const std::string cfg = kFixtures + "/pipeline.json";
  const std::vector<std::string> common = {"--config", cfg, "--subtract-background", "--deconvolve", "--starts", "50",
                                           "--seed", "7"};
  auto args_a = common;
  args_a.insert(args_a.end(), {"--out", a.string(), "pipeline"});
  auto args_b = common;
  args_b.insert(args_b.end(), {"--out", b.string(), "pipeline"});
  REQUIRE(invoke(args_a).code == 0);
  REQUIRE(invoke(args_b).code == 0);

  const json p = json::parse(slurp(a / "pipeline.json"));
  CHECK(p.at("pstats").at("P1").get<double>() ==
        doctest::Approx(expect.at("P1").get<double>()).epsilon(expect.at("P1_rel_tol").get<double>()));
  CHECK(p.at("pstats").at("P2").get<double>() ==
        doctest::Approx(expect.at("P2").get<double>()).epsilon(expect.at("P2_rel_tol").get<double>()));
  const int M = p.at("bound").at("M_lower").get<int>();
  CHECK(M >= expect.at("M_lower_range")[0].get<int>());
  CHECK(M <= expect.at("M_lower_range")[1].get<int>());

  for (const char* name : {"pstats.json", "analyze.csv", "analyze.json", "bound.json", "pipeline.json"}) {
    CAPTURE(name);
    REQUIRE(fs::exists(a / name));
    CHECK(slurp(a / name) == slurp(b / name));
  }
  const json prov = p.at("provenance");
  CHECK(prov.at("config").at("seed") == "7");
  CHECK(prov.at("input_hash").get<std::string>().size() == 16);
  CHECK(slurp(a / "analyze.csv").rfind("# ", 0) == 0);
}
