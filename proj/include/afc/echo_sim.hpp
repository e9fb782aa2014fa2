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

#ifndef AFC_ECHO_SIM_HPP
#define AFC_ECHO_SIM_HPP

// Time-domain model of AFC absorption and re-emission in the single-excitation
// sector: tooth amplitudes from the comb and the photon spectrum, emission
// probability P(t) and the echo contrast
//
//   R = P(2 pi / Delta) / ( (Delta / 2 pi) * integral_{pi/Delta}^{3 pi/Delta} P(t) dt ).
//
// Only ratios are exposed; the proportionality constant of P(t) cancels.

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "afc/dicke.hpp"

namespace afc {

enum class ToothShape { gaussian, lorentzian, square };
enum class PhotonShape { lorentzian, flat };

ToothShape parse_tooth_shape(const std::string& name);
std::string to_string(ToothShape shape);
PhotonShape parse_photon_shape(const std::string& name);
std::string to_string(PhotonShape shape);

/// Spectral description of a comb. Frequencies in Hz, delta in rad/s.
struct CombSpec {
  int N = 1;
  double delta = 0.0;      // angular tooth spacing
  double gamma = 0.0;      // tooth FWHM; 0 is the ideal (non-dephasing) comb
  double d1 = 1.0;         // peak-to-peak optical depth
  double d0 = 0.0;         // background optical depth
  double bandwidth = 0.0;  // B = N * delta / 2 pi
  ToothShape tooth_shape = ToothShape::gaussian;
  /// Optional per-tooth multiplier on d1 (comb imperfection); empty means all 1.
  std::vector<double> tooth_depth_scale;

  double spacing_hz() const;
  double finesse() const;
  double echo_time() const;
  /// Offset of tooth j from the comb center, Hz.
  double tooth_offset_hz(int j) const;
};

/// Build a comb from bandwidth and tooth spacing, both in Hz; N = round(B / spacing).
CombSpec make_comb(double bandwidth_hz, double spacing_hz, double gamma_hz, double d1 = 1.0, double d0 = 0.0,
                   ToothShape shape = ToothShape::gaussian);

/// Same, but fixing the tooth count: spacing = bandwidth / N.
CombSpec make_comb_with_teeth(int N, double bandwidth_hz, double gamma_hz, double d1 = 1.0, double d0 = 0.0,
                              ToothShape shape = ToothShape::gaussian);

/// Throws DomainError if the comb violates its invariants.
void validate(const CombSpec& comb);

struct PhotonSpectrum {
  PhotonShape shape = PhotonShape::flat;
  double fwhm = 1.0;           // Hz
  double center_offset = 0.0;  // Hz from comb center

  double density(double offset_hz) const;
};

struct EmissionTrace {
  std::vector<double> times;
  std::vector<double> p;
  double t_echo = 0.0;
};

/// Single-excitation amplitudes left by absorbing one photon, normalized.
ToothAmplitudes absorb(const CombSpec& comb, const PhotonSpectrum& photon);

/// Amplitude envelope D(t) from the tooth lineshape (Fourier transform of a
/// unit-area tooth profile of FWHM gamma).
double dephasing_envelope(ToothShape shape, double gamma_hz, double t);

/// P(t) = D(t)^2 |sum_j c_j exp(i j Delta t)|^2 on the given grid.
EmissionTrace emission_trace(const ToothAmplitudes& c, const CombSpec& comb, std::span<const double> t_grid);

/// Uniform grid over [t0, t1] with n intervals.
std::vector<double> linear_grid(double t0, double t1, int intervals);

inline constexpr int kDefaultSamplesPerPeriod = 10000;

/// Echo contrast from the first echo, with trapezoid averaging over one period
/// centered on it. `noise_floor` adds a constant emission rate, in units of
/// the period average of an undephased comb with sum |c_j|^2 = 1; dephasing
/// alone cancels between peak and average, the floor does not.
double simulated_contrast(const ToothAmplitudes& c, const CombSpec& comb,
                          int samples_per_period = kDefaultSamplesPerPeriod, double noise_floor = 0.0);

struct ContrastRow {
  int N = 0;
  double bandwidth = 0.0;
  double R = 0.0;
};

/// absorb + simulated_contrast over a list of combs, sorted by N.
std::vector<ContrastRow> sweep_R_vs_N(std::span<const CombSpec> combs, const PhotonSpectrum& photon,
                                      int samples_per_period = kDefaultSamplesPerPeriod, double noise_floor = 0.0);

/// Fit a comb from a measured optical-depth trace. d0 is the trace minimum,
/// d1 the maximum above it; teeth are local maxima above d0 + d1 / 2.
CombSpec fit_comb_trace(std::span<const double> frequency_hz, std::span<const double> optical_depth,
                        ToothShape shape = ToothShape::gaussian);

/// Load a two-column (frequency_Hz, optical_depth) text file and fit it.
CombSpec load_comb_trace(const std::string& path, ToothShape shape = ToothShape::gaussian);

}  // namespace afc

#endif  // AFC_ECHO_SIM_HPP
