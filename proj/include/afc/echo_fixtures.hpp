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


#ifndef AFC_ECHO_FIXTURES_HPP
#define AFC_ECHO_FIXTURES_HPP

#include <array>
#include <string>

#include "afc/echo_analysis.hpp"

namespace afc {

/// Synthetic detection histograms used by the test suite and the pipeline
/// demo. All of them share an 80 ps bin, a flat 0.9 counts/bin background
/// and a 354 ps Gaussian detector response.
namespace fixtures {

inline constexpr double kBinWidth = 80e-12;
inline constexpr double kBackground = 0.9;
inline constexpr double kObservedFwhm = 408e-12;
inline constexpr int kHeraldIndex = 1000;
/// Storage time per tooth at fixed comb bandwidth, seconds.
inline constexpr double kStoragePerTooth = 757.6 / 1.0936 / 564.0 * kBinWidth;
/// Teeth of the bundled sweep; storage time scales with N.
inline constexpr std::array<int, 11> kSweepTeeth = {51, 102, 153, 204, 255, 306, 357, 408, 459, 510, 564};
/// Echo area decay of the sweep, counts at zero storage and decay time.
inline constexpr double kSweepArea0 = 37347.01222;
inline constexpr double kSweepDecayTime = 154.1225045 * kBinWidth;

/// Echo of the best comb (N = 564), Gaussian echo of 408 ps observed width.
SyntheticEcho headline_spec();
/// Member of the teeth sweep.
SyntheticEcho sweep_spec(int N);

/// Noise-free raw contrast of a spec: (peak + background) / window mean.
double true_raw_contrast(const SyntheticEcho& spec);
double true_subtracted_contrast(const SyntheticEcho& spec);

std::string sweep_name(int N);

}  // namespace fixtures
}  // namespace afc

#endif  // AFC_ECHO_FIXTURES_HPP
