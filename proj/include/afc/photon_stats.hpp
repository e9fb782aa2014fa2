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

#ifndef AFC_PHOTON_STATS_HPP
#define AFC_PHOTON_STATS_HPP

// Heralded-photon absorption statistics. A pair source with thermal (or
// Poissonian) pair-number statistics feeds a non-number-resolving herald in
// arm a; arm b passes a loss eta_b, the comb absorbs with eta_w, and light
// that crosses the comb is detected with eta_t. Conditioning on no detection
// after the comb, the probability of r excitations stored in the comb is
//
//   P_r = (1 / Mcal) sum_{n >= r} p_n C(n, r) (eta_b eta_w)^r Z^{2(n - r)},
//   Z^2 = eta_b (1 - eta_w)(1 - eta_t) + (1 - eta_b),
//
// with p_n the heralded pair-number distribution.

#include <string>
#include <vector>

namespace afc {

enum class StatsModel { thermal, poisson };

StatsModel parse_stats_model(const std::string& name);
std::string to_string(StatsModel model);

struct ChannelModel {
  double mu = 1e-3;     // mean pair number per mode
  double eta_a = 1.0;   // herald arm, transmission x detection
  double eta_b = 1.0;   // transmission into the comb
  double eta_w = 1.0;   // comb write (absorption) efficiency
  double eta_t = 1.0;   // transmission x detection after the comb
  StatsModel stats = StatsModel::thermal;

  /// Z^2, the weight of the undetected loss modes.
  double loss_weight() const;
};

void validate(const ChannelModel& ch);

struct CountRates {
  double C_ab = 0.0;  // coincidences, 1/s
  double S_a = 0.0;   // singles, 1/s
  double S_b = 0.0;
  double eta_Db = 1.0;
  double tau_p = 0.0;  // pump coherence time, s
};

struct ExcitationProbabilities {
  std::vector<double> p;          // P_0 .. P_{r_max}
  double truncation_error = 0.0;  // bound on the dropped series tail
  int terms = 0;                  // pair numbers summed
};

/// Pair-number weight of the source: mu^n / (mu + 1)^(n + 1) for thermal
/// statistics, exp(-mu) mu^n / n! for Poissonian.
double pair_weight(int n, double mu, StatsModel model = StatsModel::thermal);
double thermal_weight(int n, double mu);

ExcitationProbabilities excitation_probabilities(const ChannelModel& ch, int r_max);

struct ExcitationUncertainty {
  double P1 = 0.0;
  double P2 = 0.0;
  double sigma_P1 = 0.0;
  double sigma_P2 = 0.0;
};

/// First-order propagation of the mu and d1 uncertainties into P1 and P2.
/// eta_w is recomputed from d1 / finesse, so ch.eta_w is ignored.
ExcitationUncertainty propagate_uncertainty(const ChannelModel& ch, double sigma_mu, double d1, double finesse,
                                            double sigma_d1);

/// mu = 1 / g2_ab, valid only deep in the g2_ab >> 1 regime.
double estimate_mu_from_g2(double g2_ab);

struct EtaEstimates {
  double eta_a = 0.0;
  double eta_b_star = 0.0;
};

/// eta_a = C_ab / S_b, eta_b* = C_ab / (S_a eta_Db).
EtaEstimates estimate_etas(const CountRates& rates);

/// eta_w = 1 - exp(-d1 / F).
double write_efficiency(double d1, double finesse);

/// g2 = p_joint / (p_1 p_2), used for both auto- and cross-correlations.
double g2_from_probabilities(double p_joint, double p_1, double p_2);

struct ExcitationTally {
  long long trials = 0;
  long long heralded = 0;
  std::vector<long long> counts;  // accepted events by stored photon number
};

/// Monte-Carlo of the same channel: sample pair numbers, thin photons through
/// the herald and the beamsplitter cascade, keep heralded events without a
/// detection after the comb. Trials are pair-number draws conditioned on
/// n >= 1 (n = 0 never heralds). Work is sharded over `workers` threads with
/// per-shard seeds derived from `seed`; the result depends only on
/// (seed, trials, workers).
ExcitationTally monte_carlo_excitations(const ChannelModel& ch, long long trials, unsigned long long seed,
                                        int r_max, int workers = 1);

}  // namespace afc

#endif  // AFC_PHOTON_STATS_HPP
