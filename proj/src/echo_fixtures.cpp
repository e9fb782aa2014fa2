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


#include "afc/echo_fixtures.hpp"

#include <cmath>
#include <cstdio>

namespace afc::fixtures {

namespace {

SyntheticEcho base_spec(double storage_time, double area) {
  SyntheticEcho s;
  s.bin_width = kBinWidth;
  s.background = kBackground;
  s.herald_index = kHeraldIndex;
  s.detector_fwhm = kDefaultDetectorFwhm;
  s.echo_fwhm = std::sqrt(kObservedFwhm * kObservedFwhm - s.detector_fwhm * s.detector_fwhm);
  s.storage_time = storage_time;
  s.echo_area = area;
  s.bins = kHeraldIndex + static_cast<int>(1.6 * storage_time / kBinWidth);
  return s;
}

}  // namespace

SyntheticEcho headline_spec() {
  constexpr double kPeak = 139.55;
  const double sigma = kObservedFwhm / 2.3548200450309493;
  const double area = kPeak * sigma * std::sqrt(2.0 * std::acos(-1.0)) / kBinWidth;
  return base_spec(564 * kStoragePerTooth, area);
}

SyntheticEcho sweep_spec(int N) {
  const double t = N * kStoragePerTooth;
  return base_spec(t, kSweepArea0 * std::exp(-t / kSweepDecayTime));
}

double true_raw_contrast(const SyntheticEcho& spec) {
  const double window_bins = spec.storage_time / spec.bin_width;
  return (spec.observed_peak() + spec.background) / (spec.background + spec.echo_area / window_bins);
}

double true_subtracted_contrast(const SyntheticEcho& spec) {
  const double window_bins = spec.storage_time / spec.bin_width;
  return spec.observed_peak() / (spec.echo_area / window_bins);
}

std::string sweep_name(int N) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sweep_N%03d", N);
  return buf;
}

}  // namespace afc::fixtures
