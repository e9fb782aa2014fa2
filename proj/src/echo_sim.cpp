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

#include "afc/echo_sim.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "afc/errors.hpp"
#include "afc/numeric.hpp"

namespace afc {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::complex<double> tooth_sum(const ToothAmplitudes& c, double delta, double t) {
  // Horner evaluation of sum_j c_j z^j with z = exp(i delta t).
  const std::complex<double> z = std::polar(1.0, delta * t);
  std::complex<double> s{0.0, 0.0};
  for (Eigen::Index j = c.size() - 1; j >= 0; --j) s = s * z + c(j);
  return s;
}

}  // namespace

ToothShape parse_tooth_shape(const std::string& name) {
  if (name == "gaussian") return ToothShape::gaussian;
  if (name == "lorentzian") return ToothShape::lorentzian;
  if (name == "square") return ToothShape::square;
  throw ConfigError("unknown tooth shape '" + name + "'");
}

std::string to_string(ToothShape shape) {
  switch (shape) {
    case ToothShape::gaussian:
      return "gaussian";
    case ToothShape::lorentzian:
      return "lorentzian";
    case ToothShape::square:
      return "square";
  }
  return "gaussian";
}

PhotonShape parse_photon_shape(const std::string& name) {
  if (name == "lorentzian") return PhotonShape::lorentzian;
  if (name == "flat") return PhotonShape::flat;
  throw ConfigError("unknown photon spectrum shape '" + name + "'");
}

std::string to_string(PhotonShape shape) { return shape == PhotonShape::flat ? "flat" : "lorentzian"; }

double CombSpec::spacing_hz() const { return delta / kTwoPi; }

double CombSpec::finesse() const {
  if (gamma <= 0.0) return std::numeric_limits<double>::infinity();
  return spacing_hz() / gamma;
}

double CombSpec::echo_time() const { return kTwoPi / delta; }

double CombSpec::tooth_offset_hz(int j) const { return (j - 0.5 * (N - 1)) * spacing_hz(); }

CombSpec make_comb(double bandwidth_hz, double spacing_hz, double gamma_hz, double d1, double d0, ToothShape shape) {
  if (!(spacing_hz > 0.0) || !(bandwidth_hz > 0.0)) throw DomainError("make_comb: bandwidth and spacing must be positive");
  CombSpec comb;
  comb.N = static_cast<int>(std::lround(bandwidth_hz / spacing_hz));
  comb.delta = kTwoPi * spacing_hz;
  comb.gamma = gamma_hz;
  comb.d1 = d1;
  comb.d0 = d0;
  comb.bandwidth = bandwidth_hz;
  comb.tooth_shape = shape;
  validate(comb);
  return comb;
}

CombSpec make_comb_with_teeth(int N, double bandwidth_hz, double gamma_hz, double d1, double d0, ToothShape shape) {
  if (N < 1) throw DomainError("make_comb_with_teeth: N must be >= 1");
  return make_comb(bandwidth_hz, bandwidth_hz / N, gamma_hz, d1, d0, shape);
}

void validate(const CombSpec& comb) {
  if (comb.N < 1) throw DomainError("comb: N must be >= 1");
  if (!(comb.delta > 0.0)) throw DomainError("comb: tooth spacing must be positive");
  if (comb.gamma < 0.0) throw DomainError("comb: tooth linewidth must be non-negative");
  if (comb.d1 < 0.0 || comb.d0 < 0.0) throw DomainError("comb: optical depths must be non-negative");
  if (std::lround(comb.bandwidth * kTwoPi / comb.delta) != comb.N) {
    throw DomainError("comb: N differs from round(B * 2 pi / delta)");
  }
  if (comb.gamma > 0.0 && !(comb.finesse() > 1.0)) throw DomainError("comb: finesse must exceed 1 (teeth unresolved)");
  if (!comb.tooth_depth_scale.empty()) {
    if (comb.tooth_depth_scale.size() != static_cast<std::size_t>(comb.N)) {
      throw DomainError("comb: tooth_depth_scale length differs from N");
    }
    for (double s : comb.tooth_depth_scale) {
      if (s < 0.0) throw DomainError("comb: tooth_depth_scale entries must be non-negative");
    }
  }
}

double PhotonSpectrum::density(double offset_hz) const {
  if (shape == PhotonShape::flat) return 1.0;
  const double x = 2.0 * (offset_hz - center_offset) / fwhm;
  return 1.0 / (1.0 + x * x);
}

ToothAmplitudes absorb(const CombSpec& comb, const PhotonSpectrum& photon) {
  validate(comb);
  if (!(photon.fwhm > 0.0)) throw DomainError("photon spectrum: fwhm must be positive");
  // Fraction of each period covered by a tooth; the gamma -> 0 limit keeps the
  // first-order term of 1 - exp(-d1 * fill), which is all that survives the
  // normalization.
  const double fill = comb.gamma > 0.0 ? 1.0 / comb.finesse() : 0.0;
  ToothAmplitudes c(comb.N);
  for (int j = 0; j < comb.N; ++j) {
    const double depth = comb.d1 * (comb.tooth_depth_scale.empty() ? 1.0 : comb.tooth_depth_scale[static_cast<std::size_t>(j)]);
    const double absorption = fill > 0.0 ? -std::expm1(-depth * fill) : depth;
    c(j) = std::sqrt(absorption * photon.density(comb.tooth_offset_hz(j)));
  }
  const double norm = c.norm();
  if (!(norm > 0.0)) throw DomainError("absorb: comb absorbs nothing");
  c /= norm;
  return c;
}

double dephasing_envelope(ToothShape shape, double gamma_hz, double t) {
  if (gamma_hz <= 0.0) return 1.0;
  const double x = std::numbers::pi * gamma_hz * std::abs(t);
  switch (shape) {
    case ToothShape::gaussian:
      return std::exp(-x * x / (4.0 * std::numbers::ln2));
    case ToothShape::lorentzian:
      return std::exp(-x);
    case ToothShape::square:
      return x == 0.0 ? 1.0 : std::sin(x) / x;
  }
  return 1.0;
}

EmissionTrace emission_trace(const ToothAmplitudes& c, const CombSpec& comb, std::span<const double> t_grid) {
  validate(comb);
  if (c.size() != comb.N) throw DomainError("emission_trace: amplitude count differs from comb N");
  if (!std::is_sorted(t_grid.begin(), t_grid.end())) throw DomainError("emission_trace: time grid must be ascending");
  EmissionTrace trace;
  trace.t_echo = comb.echo_time();
  trace.times.assign(t_grid.begin(), t_grid.end());
  trace.p.resize(t_grid.size());
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    const double env = dephasing_envelope(comb.tooth_shape, comb.gamma, t_grid[i]);
    trace.p[i] = env * env * std::norm(tooth_sum(c, comb.delta, t_grid[i]));
  }
  return trace;
}

std::vector<double> linear_grid(double t0, double t1, int intervals) {
  if (intervals < 1) throw DomainError("linear_grid: need at least one interval");
  std::vector<double> t(static_cast<std::size_t>(intervals) + 1);
  const double h = (t1 - t0) / intervals;
  for (int i = 0; i <= intervals; ++i) t[static_cast<std::size_t>(i)] = t0 + h * i;
  t.back() = t1;
  return t;
}

double simulated_contrast(const ToothAmplitudes& c, const CombSpec& comb, int samples_per_period, double noise_floor) {
  if (noise_floor < 0.0) throw DomainError("simulated_contrast: noise floor must be non-negative");
  const double te = comb.echo_time();
  const auto grid = linear_grid(0.5 * te, 1.5 * te, samples_per_period);
  const auto trace = emission_trace(c, comb, grid);
  const double mean = trapezoid(trace.p, te / samples_per_period) / te + noise_floor;
  const std::vector<double> at_echo{te};
  const double peak = emission_trace(c, comb, at_echo).p.front() + noise_floor;
  if (!(mean > 0.0)) throw DomainError("simulated_contrast: period-averaged emission vanishes");
  return peak / mean;
}

std::vector<ContrastRow> sweep_R_vs_N(std::span<const CombSpec> combs, const PhotonSpectrum& photon,
                                      int samples_per_period, double noise_floor) {
  std::vector<ContrastRow> rows;
  rows.reserve(combs.size());
  for (const auto& comb : combs) {
    rows.push_back({comb.N, comb.bandwidth, simulated_contrast(absorb(comb, photon), comb, samples_per_period, noise_floor)});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const ContrastRow& a, const ContrastRow& b) { return a.N < b.N; });
  return rows;
}

CombSpec fit_comb_trace(std::span<const double> f, std::span<const double> od, ToothShape shape) {
  if (f.size() != od.size() || f.size() < 3) throw DomainError("comb trace: need matching columns with >= 3 rows");
  if (!std::is_sorted(f.begin(), f.end())) throw DomainError("comb trace: frequencies must be ascending");
  const double d0 = *std::min_element(od.begin(), od.end());
  const double d1 = *std::max_element(od.begin(), od.end()) - d0;
  if (!(d1 > 0.0)) throw DomainError("comb trace: flat optical depth, no teeth");
  const double threshold = d0 + 0.5 * d1;

  std::vector<std::size_t> peaks;
  for (std::size_t i = 1; i + 1 < od.size(); ++i) {
    if (od[i] > threshold && od[i] > od[i - 1] && od[i] >= od[i + 1]) peaks.push_back(i);
  }
  if (peaks.size() < 2) throw DomainError("comb trace: fewer than two teeth found");

  std::vector<double> gaps;
  for (std::size_t p = 1; p < peaks.size(); ++p) gaps.push_back(f[peaks[p]] - f[peaks[p - 1]]);
  std::nth_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(gaps.size() / 2), gaps.end());
  const double spacing = gaps[gaps.size() / 2];

  // Half-maximum crossings, linearly interpolated, relative to the background.
  auto crossing = [&](std::size_t from, int step, double level) {
    std::size_t i = from;
    while (true) {
      if ((step < 0 && i == 0) || (step > 0 && i + 1 == od.size())) return f[i];
      const std::size_t nxt = step < 0 ? i - 1 : i + 1;
      if (od[nxt] <= level) {
        const double frac = (od[i] - level) / (od[i] - od[nxt]);
        return f[i] + frac * (f[nxt] - f[i]);
      }
      i = nxt;
    }
  };
  double width_sum = 0.0;
  for (std::size_t p : peaks) {
    const double level = d0 + 0.5 * (od[p] - d0);
    width_sum += crossing(p, +1, level) - crossing(p, -1, level);
  }

  CombSpec comb;
  comb.N = static_cast<int>(peaks.size());
  comb.delta = kTwoPi * spacing;
  comb.gamma = width_sum / static_cast<double>(peaks.size());
  comb.d0 = d0;
  comb.d1 = d1;
  comb.bandwidth = comb.N * spacing;
  comb.tooth_shape = shape;
  validate(comb);
  return comb;
}

CombSpec load_comb_trace(const std::string& path, ToothShape shape) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open comb trace '" + path + "'");
  std::vector<double> f;
  std::vector<double> od;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    double a = 0.0;
    double b = 0.0;
    if (!(ss >> a >> b)) {
      if (f.empty()) continue;  // header row
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected two numeric columns");
    }
    f.push_back(a);
    od.push_back(b);
  }
  return fit_comb_trace(f, od, shape);
}

}  // namespace afc
