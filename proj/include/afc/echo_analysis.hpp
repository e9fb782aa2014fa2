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

#ifndef AFC_ECHO_ANALYSIS_HPP
#define AFC_ECHO_ANALYSIS_HPP

// Echo contrast from detection-time histograms: background level before the
// herald, Gaussian fit of the echo, window average A over one storage time,
// and R = E' / A' with optional background subtraction (A' = A - bg) and
// detector-jitter deconvolution (E' = E * dt_p / sqrt(dt_p^2 - dt_D^2)).

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace afc {

inline constexpr double kDefaultDetectorFwhm = 354e-12;

struct TimeHistogram {
  double bin_width = 0.0;  // s
  std::vector<std::int64_t> counts;
  int herald_index = 0;
  double storage_time = 0.0;  // s
  double detector_fwhm = kDefaultDetectorFwhm;

  /// Centre of bin i relative to the herald bin centre, s.
  double time(std::size_t i) const { return (static_cast<double>(i) - herald_index) * bin_width; }
};

void validate(const TimeHistogram& h);

struct BackgroundEstimate {
  double rate = 0.0;   // counts per bin
  double sigma = 0.0;  // standard error of the mean
  int bins = 0;
};

inline constexpr int kMinBackgroundBins = 50;

/// Mean counts per bin over all bins before the herald.
BackgroundEstimate estimate_background(const TimeHistogram& h);

/// Interval in seconds relative to the herald.
struct TimeWindow {
  double begin = 0.0;
  double end = 0.0;
};

/// Storage time +- a quarter storage time (at least 20 bins either side).
TimeWindow default_fit_window(const TimeHistogram& h);

struct EchoFit {
  double E = 0.0;       // amplitude above the fitted offset, counts per bin
  double t0 = 0.0;      // s from the herald
  double fwhm = 0.0;    // s
  double offset = 0.0;  // counts per bin
  double background_rate = 0.0;
  double background_sigma = 0.0;
  double A = 0.0;  // mean counts per bin over one storage time centred on t0
  double A_sigma = 0.0;
  int A_bins = 0;
  /// Covariance of (E, t0, fwhm, offset).
  Eigen::Matrix4d covariance = Eigen::Matrix4d::Zero();
  double chi2_per_dof = 0.0;
  int iterations = 0;

  double sigma_E() const { return std::sqrt(covariance(0, 0)); }
  double sigma_fwhm() const { return std::sqrt(covariance(2, 2)); }
};

/// Poisson-weighted least-squares fit of offset + E exp(-4 ln2 (t - t0)^2 / fwhm^2)
/// over the bins inside `window`. Throws LowSignalError when the fit fails or
/// E is below three standard errors.
EchoFit fit_echo(const TimeHistogram& h, const TimeWindow& window);
EchoFit fit_echo(const TimeHistogram& h);

struct Corrections {
  bool subtract_background = false;
  bool deconvolve = false;
  double detector_fwhm = kDefaultDetectorFwhm;
};

/// sqrt(dt_p^2 / (dt_p^2 - dt_D^2)); throws DomainError if dt_p <= dt_D.
double deconvolution_factor(double echo_fwhm, double detector_fwhm);

struct Contrast {
  double R = 0.0;
  double sigma_R = 0.0;
};

Contrast echo_contrast(const EchoFit& fit, const Corrections& corrections);

struct SweepRow {
  std::string label;
  bool ok = false;
  std::string error;
  EchoFit fit;
  Contrast raw;
  Contrast subtracted;
  Contrast deconvolved;
};

/// Full chain per histogram; a failing histogram yields a row with ok = false.
/// Rows come back in input order.
std::vector<SweepRow> contrast_vs_param_sweep(std::span<const TimeHistogram> histograms,
                                              std::span<const std::string> labels);

/// Histogram from a CSV of (bin_start_s, counts) and a JSON sidecar with
/// bin_width, herald_index, storage_time and optionally detector_fwhm.
TimeHistogram load_histogram(const std::string& csv_path, const std::string& sidecar_path);
std::string histogram_csv(const TimeHistogram& h);
std::string histogram_sidecar(const TimeHistogram& h);

/// Synthetic histogram model: flat background plus a Gaussian echo of
/// intrinsic width `echo_fwhm`, broadened by a Gaussian detector response
/// (area preserved) and integrated over each bin.
struct SyntheticEcho {
  double bin_width = 80e-12;
  int bins = 2000;
  int herald_index = 400;
  double storage_time = 50e-9;
  double background = 0.9;    // counts per bin
  double echo_area = 1000.0;  // total echo counts
  double echo_fwhm = 200e-12;
  double detector_fwhm = kDefaultDetectorFwhm;

  double observed_fwhm() const;
  /// Peak counts per bin of the observed echo above background (continuum).
  double observed_peak() const;
};

std::vector<double> expected_counts(const SyntheticEcho& spec);
TimeHistogram sample_histogram(const SyntheticEcho& spec, std::uint64_t seed);
/// Expected counts scaled by `scale` and rounded with error diffusion, so
/// low-rate backgrounds keep their mean. Noise-free up to the rounding.
TimeHistogram rounded_histogram(const SyntheticEcho& spec, double scale = 1.0);

}  // namespace afc

#endif  // AFC_ECHO_ANALYSIS_HPP
