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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <vector>

#include "afc/dicke.hpp"
#include "afc/echo_sim.hpp"
#include "afc/numeric.hpp"

using namespace afc;

namespace {

PhotonSpectrum flat() { return {PhotonShape::flat, 1.0, 0.0}; }
PhotonSpectrum lorentzian6() { return {PhotonShape::lorentzian, 6e9, 0.0}; }

}  // namespace

TEST_CASE("ideal comb with a flat photon gives R = N") {
  for (int N : {2, 9, 30, 100, 564}) {
    CAPTURE(N);
    const CombSpec comb = make_comb_with_teeth(N, 6e9, 0.0);
    const auto c = absorb(comb, flat());
    CHECK(echo_contrast_single_excitation(c) == doctest::Approx(N).epsilon(1e-12));
    CHECK(simulated_contrast(c, comb) == doctest::Approx(N).epsilon(1e-3));
  }
}

TEST_CASE("comb bookkeeping") {
  const CombSpec comb = make_comb(6e9, 6e9 / 564, 2e6);
  CHECK(comb.N == 564);
  CHECK(comb.spacing_hz() == doctest::Approx(6e9 / 564));
  CHECK(comb.echo_time() == doctest::Approx(564 / 6e9));
  CHECK(comb.finesse() == doctest::Approx(6e9 / 564 / 2e6));
  CHECK(comb.tooth_offset_hz(0) == doctest::Approx(-0.5 * 563 * comb.spacing_hz()));
  CHECK_THROWS_AS(make_comb(6e9, 0.0, 0.0), DomainError);
  CHECK_THROWS_AS(make_comb_with_teeth(9, 6e9, 6e9 / 9 * 2), DomainError);  // finesse below 1
}

TEST_CASE("emission trace peaks at the echo time") {
  const CombSpec comb = make_comb_with_teeth(9, 6e9, 0.0);
  const auto c = absorb(comb, flat());
  const auto grid = linear_grid(0.0, 2.0 * comb.echo_time(), 400);
  const auto trace = emission_trace(c, comb, grid);
  CHECK(trace.p[0] == doctest::Approx(9.0));
  CHECK(trace.p[200] == doctest::Approx(9.0));
  CHECK(trace.t_echo == doctest::Approx(comb.echo_time()));
  // At te / N the tooth phasors are the N-th roots of unity and cancel.
  const std::vector<double> t{comb.echo_time() / 9.0};
  CHECK(emission_trace(c, comb, t).p[0] < 1e-24);
}

TEST_CASE("30 teeth over 6 GHz echo at 5 ns") {
  const CombSpec comb = make_comb(6e9, 0.2e9, 0.0);
  CHECK(comb.N == 30);
  CHECK(comb.echo_time() == doctest::Approx(5e-9));
}

TEST_CASE("ideal trace is periodic") {
  const CombSpec comb = make_comb_with_teeth(7, 6e9, 0.0);
  const auto c = absorb(comb, lorentzian6());
  const double te = comb.echo_time();
  const auto grid = linear_grid(0.0, te, 97);
  std::vector<double> shifted;
  for (double t : grid) shifted.push_back(t + te);
  const auto a = emission_trace(c, comb, grid);
  const auto b = emission_trace(c, comb, shifted);
  for (std::size_t i = 0; i < grid.size(); ++i) CHECK(b.p[i] == doctest::Approx(a.p[i]).epsilon(1e-9));
}

TEST_CASE("a single tooth only shows the envelope") {
  const CombSpec comb = make_comb_with_teeth(1, 6e9, 1e9);
  const auto c = absorb(comb, flat());
  const auto grid = linear_grid(0.0, 3e-9, 30);
  const auto trace = emission_trace(c, comb, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double d = dephasing_envelope(ToothShape::gaussian, 1e9, grid[i]);
    CHECK(trace.p[i] == doctest::Approx(d * d));
  }
}

TEST_CASE("period average equals the incoherent sum times the mean envelope") {
  const CombSpec comb = make_comb_with_teeth(12, 6e9, 2e6, 1.0, 0.0, ToothShape::lorentzian);
  const auto c = absorb(comb, lorentzian6());
  const double te = comb.echo_time();
  const int n = 20000;
  const auto grid = linear_grid(0.5 * te, 1.5 * te, n);
  const auto trace = emission_trace(c, comb, grid);
  std::vector<double> env2;
  for (double t : grid) env2.push_back(std::pow(dephasing_envelope(comb.tooth_shape, comb.gamma, t), 2));
  const double mean_p = trapezoid(trace.p, te / n) / te;
  const double mean_env2 = trapezoid(env2, te / n) / te;
  CHECK(mean_p == doctest::Approx(c.squaredNorm() * mean_env2).epsilon(1e-3));
}

TEST_CASE("absorption amplitudes") {
  const CombSpec comb = make_comb_with_teeth(11, 6e9, 0.0);
  const auto flat_c = absorb(comb, flat());
  CHECK((flat_c - w_state(11)).norm() < 1e-14);

  const auto lor = absorb(comb, PhotonSpectrum{PhotonShape::lorentzian, 6e9, 0.0});
  for (int j = 5; j + 1 < 11; ++j) CHECK(std::abs(lor(j + 1)) < std::abs(lor(j)));
  for (int j = 5; j > 0; --j) CHECK(std::abs(lor(j - 1)) < std::abs(lor(j)));

  const auto wide = absorb(comb, PhotonSpectrum{PhotonShape::lorentzian, 600e9, 0.0});
  CHECK(wide.cwiseAbs().maxCoeff() / wide.cwiseAbs().minCoeff() < 1.01);
  CHECK(wide.squaredNorm() == doctest::Approx(1.0));
}

TEST_CASE("a missing tooth counts as a non-participating tooth") {
  CombSpec comb = make_comb_with_teeth(9, 6e9, 0.0);
  comb.tooth_depth_scale.assign(9, 1.0);
  comb.tooth_depth_scale[4] = 0.0;
  CHECK(simulated_contrast(absorb(comb, flat()), comb) == doctest::Approx(8.0).epsilon(1e-3));
}

TEST_CASE("quadrature is converged at the default sampling") {
  const CombSpec comb = make_comb_with_teeth(100, 6e9, 5e6);
  const auto c = absorb(comb, lorentzian6());
  const double r1 = simulated_contrast(c, comb);
  const double r2 = simulated_contrast(c, comb, 2 * kDefaultSamplesPerPeriod);
  CHECK(std::abs(r2 - r1) / r1 < 1e-3);
}

TEST_CASE("Gaussian envelope matches a Monte-Carlo average over tooth detunings") {
  const double gamma = 3e6;
  const double sigma = gamma / (2.0 * std::sqrt(2.0 * std::numbers::ln2));
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, sigma);
  std::vector<double> detunings(10000);
  for (double& d : detunings) d = g(rng);
  for (double t : {0.0, 50e-9, 100e-9, 200e-9}) {
    std::complex<double> s{0.0, 0.0};
    for (double d : detunings) s += std::polar(1.0, 2.0 * std::numbers::pi * d * t);
    s /= static_cast<double>(detunings.size());
    CHECK(std::abs(s) == doctest::Approx(dephasing_envelope(ToothShape::gaussian, gamma, t)).epsilon(0.03));
  }
}

TEST_CASE("Lorentzian dephasing never raises R") {
  const int N = 20;
  double last = 1e300;
  for (double gamma : {0.0, 1e6, 5e6, 20e6, 60e6, 150e6}) {
    const CombSpec comb = make_comb_with_teeth(N, 6e9, gamma, 1.0, 0.0, ToothShape::lorentzian);
    const double R = simulated_contrast(absorb(comb, flat()), comb);
    CHECK(R <= last * (1.0 + 1e-9));
    last = R;
  }
}

TEST_CASE("Gaussian and square dephasing raise R by at most the window curvature") {
  // The envelope is averaged over a full period around the echo; where it is
  // concave the average falls below the echo value by up to about 1.3 %.
  for (auto shape : {ToothShape::gaussian, ToothShape::square}) {
    for (double gamma : {1e6, 5e6, 20e6, 60e6}) {
      const CombSpec comb = make_comb_with_teeth(20, 6e9, gamma, 1.0, 0.0, shape);
      CHECK(simulated_contrast(absorb(comb, flat()), comb) <= 20.0 * 1.014);
    }
    const CombSpec heavy = make_comb_with_teeth(20, 6e9, 250e6, 1.0, 0.0, shape);
    CHECK(simulated_contrast(absorb(heavy, flat()), heavy) < 20.0);
  }
}

TEST_CASE("dephasing envelopes") {
  CHECK(dephasing_envelope(ToothShape::gaussian, 0.0, 1.0) == 1.0);
  CHECK(dephasing_envelope(ToothShape::lorentzian, 1e6, 1e-6 / std::numbers::pi) == doctest::Approx(std::exp(-1.0)));
  // Gaussian tooth of FWHM gamma: envelope exp(-(pi gamma t)^2 / (4 ln 2)).
  const double t = 1e-7;
  CHECK(dephasing_envelope(ToothShape::gaussian, 2e6, t) ==
        doctest::Approx(std::exp(-std::pow(std::numbers::pi * 2e6 * t, 2) / (4 * std::numbers::ln2))));
  CHECK(dephasing_envelope(ToothShape::square, 1e6, 0.0) == 1.0);
}

TEST_CASE("Lorentzian photon reduces R below N for a broadband comb") {
  const CombSpec comb = make_comb_with_teeth(30, 6e9, 0.0);
  const double R = simulated_contrast(absorb(comb, lorentzian6()), comb);
  CHECK(R < 30.0);
  CHECK(R > 20.0);
}

TEST_CASE("R/N grows as the comb bandwidth shrinks below the photon bandwidth") {
  const int N = 9;
  double last = 0.0;
  for (double B : {6e9, 4e9, 2e9, 1e9, 0.5e9}) {
    const CombSpec comb = make_comb_with_teeth(N, B, 0.0);
    const double ratio = simulated_contrast(absorb(comb, lorentzian6()), comb) / N;
    CHECK(ratio > last);
    last = ratio;
  }
}

TEST_CASE("dephasing cancels in the contrast without a noise floor") {
  const CombSpec comb = make_comb_with_teeth(500, 6e9, 10e6);
  CHECK(dephasing_envelope(comb.tooth_shape, comb.gamma, comb.echo_time()) < 0.1);
  CHECK(simulated_contrast(absorb(comb, flat()), comb, 4000) == doctest::Approx(500.0).epsilon(0.02));
}

TEST_CASE("R grows then stalls with N at fixed tooth width over a noise floor") {
  // Fixed tooth linewidth: more teeth means a longer storage time, a weaker
  // echo and a larger share of the constant floor.
  std::vector<CombSpec> combs;
  for (int N : {10, 50, 100, 200, 300, 400, 500}) combs.push_back(make_comb_with_teeth(N, 6e9, 10e6));
  const auto rows = sweep_R_vs_N(combs, lorentzian6(), 4000, 0.05);
  REQUIRE(rows.size() == 7);
  CHECK(rows[1].R > rows[0].R);
  CHECK(rows[2].R > rows[1].R);
  const double early = (rows[1].R - rows[0].R) / 40.0;
  const double late = (rows[6].R - rows[5].R) / 100.0;
  CHECK(late < 0.25 * early);
  double peak = 0.0;
  for (const auto& r : rows) peak = std::max(peak, r.R);
  CHECK(peak < 0.5 * rows.back().N);
}

TEST_CASE("single-row sweep equals simulated_contrast") {
  const CombSpec comb = make_comb_with_teeth(30, 6e9, 5e6);
  const std::vector<CombSpec> one{comb};
  const auto rows = sweep_R_vs_N(one, lorentzian6());
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].R == simulated_contrast(absorb(comb, lorentzian6()), comb));
}

TEST_CASE("comb trace fit recovers spacing, width and depths") {
  const int N = 9;
  const double spacing = 6e9 / N;
  const double gamma = spacing / 8.0;
  std::vector<double> f;
  std::vector<double> od;
  const double s = gamma / (2.0 * std::sqrt(2.0 * std::numbers::ln2));
  for (int i = 0; i <= 9000; ++i) {
    const double x = -3.3e9 + i * (6.6e9 / 9000);
    double d = 0.1;
    for (int j = 0; j < N; ++j) {
      const double c = (j - 4) * spacing;
      d += 2.0 * std::exp(-0.5 * (x - c) * (x - c) / (s * s));
    }
    f.push_back(x);
    od.push_back(d);
  }
  const CombSpec comb = fit_comb_trace(f, od);
  CHECK(comb.N == N);
  CHECK(comb.spacing_hz() == doctest::Approx(spacing).epsilon(1e-3));
  CHECK(comb.gamma == doctest::Approx(gamma).epsilon(1e-2));
  CHECK(comb.d0 == doctest::Approx(0.1).epsilon(1e-3));
  CHECK(comb.d1 == doctest::Approx(2.0).epsilon(1e-3));
  CHECK(comb.finesse() == doctest::Approx(8.0).epsilon(1e-2));

  const auto path = std::filesystem::temp_directory_path() / "afc_comb_trace.csv";
  {
    std::ofstream out(path);
    out << "frequency_hz,optical_depth\n";
    for (std::size_t i = 0; i < f.size(); ++i) out << f[i] << ',' << od[i] << '\n';
  }
  CHECK(load_comb_trace(path.string()).N == N);
  std::filesystem::remove(path);
}

TEST_CASE("shape names round-trip") {
  for (auto s : {ToothShape::gaussian, ToothShape::lorentzian, ToothShape::square}) {
    CHECK(parse_tooth_shape(to_string(s)) == s);
  }
  CHECK(parse_photon_shape("flat") == PhotonShape::flat);
  CHECK_THROWS_AS(parse_photon_shape("boxcar"), ConfigError);
}
