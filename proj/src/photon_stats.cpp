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

#include "afc/photon_stats.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

#include "afc/errors.hpp"
#include "afc/numeric.hpp"

namespace afc {

namespace {

constexpr int kMaxPairNumber = 1'000'000;
constexpr double kSeriesRelTol = 1e-15;

double binomial(int n, int r) {
  if (r < 0 || r > n) return 0.0;
  if (n <= 60) {
    double c = 1.0;
    for (int i = 1; i <= r; ++i) c = c * (n - r + i) / i;
    return c;
  }
  return std::exp(std::lgamma(n + 1.0) - std::lgamma(r + 1.0) - std::lgamma(n - r + 1.0));
}

double power(double base, int exponent) { return exponent == 0 ? 1.0 : std::pow(base, exponent); }

bool in_unit_interval(double x) { return x >= 0.0 && x <= 1.0; }

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

StatsModel parse_stats_model(const std::string& name) {
  if (name == "thermal") return StatsModel::thermal;
  if (name == "poisson") return StatsModel::poisson;
  throw ConfigError("unknown stats model '" + name + "' (expected thermal or poisson)");
}

std::string to_string(StatsModel model) { return model == StatsModel::thermal ? "thermal" : "poisson"; }

double ChannelModel::loss_weight() const { return eta_b * (1.0 - eta_w) * (1.0 - eta_t) + (1.0 - eta_b); }

void validate(const ChannelModel& ch) {
  if (!(ch.mu > 0.0) || !std::isfinite(ch.mu)) throw DomainError("channel: mu must be positive");
  if (!in_unit_interval(ch.eta_a) || !in_unit_interval(ch.eta_b) || !in_unit_interval(ch.eta_w) ||
      !in_unit_interval(ch.eta_t)) {
    throw DomainError("channel: efficiencies must lie in [0, 1]");
  }
  if (ch.eta_b * ch.eta_w + ch.loss_weight() > 1.0 + 1e-12) throw DomainError("channel: loss modes over-complete");
}

double thermal_weight(int n, double mu) {
  if (n < 0) throw DomainError("thermal_weight: n must be >= 0");
  if (!(mu > 0.0)) throw DomainError("thermal_weight: mu must be positive");
  return std::exp(n * std::log(mu) - (n + 1) * std::log1p(mu));
}

double pair_weight(int n, double mu, StatsModel model) {
  if (model == StatsModel::thermal) return thermal_weight(n, mu);
  if (n < 0) throw DomainError("pair_weight: n must be >= 0");
  if (!(mu > 0.0)) throw DomainError("pair_weight: mu must be positive");
  return std::exp(-mu + n * std::log(mu) - std::lgamma(n + 1.0));
}

ExcitationProbabilities excitation_probabilities(const ChannelModel& ch, int r_max) {
  validate(ch);
  if (r_max < 0) throw DomainError("excitation_probabilities: r_max must be >= 0");
  const double x = ch.eta_b * ch.eta_w;
  const double z2 = ch.loss_weight();
  const double s = x + z2;  // probability a photon leaves no click after the comb
  const double log_miss_a = std::log1p(-std::min(ch.eta_a, 1.0 - 1e-300));

  std::vector<CompensatedSum<double>> num(static_cast<std::size_t>(r_max) + 1);
  CompensatedSum<double> total;
  double weight = pair_weight(0, ch.mu, ch.stats);
  double tail_ratio = 0.0;
  double last_term = 0.0;
  int n = 1;
  for (;; ++n) {
    if (n > kMaxPairNumber) throw NumericError("excitation_probabilities: pair-number series did not converge");
    weight *= ch.stats == StatsModel::thermal ? ch.mu / (ch.mu + 1.0) : ch.mu / n;
    const double herald = ch.eta_a >= 1.0 ? 1.0 : -std::expm1(n * log_miss_a);
    const double pn = weight * herald;
    const double term = pn * power(s, n);
    total += term;
    for (int r = 0; r <= std::min(n, r_max); ++r) {
      num[static_cast<std::size_t>(r)] += pn * binomial(n, r) * power(x, r) * power(z2, n - r);
    }
    last_term = term;
    // Remaining terms shrink at least geometrically with this ratio (herald <= 1).
    tail_ratio = s * (ch.stats == StatsModel::thermal ? ch.mu / (ch.mu + 1.0) : ch.mu / (n + 1));
    if (term <= kSeriesRelTol * total.value() && tail_ratio < 1.0) break;
    if (term == 0.0 && n > 1) break;
  }
  const double norm = total.value();
  if (!(norm > 0.0)) throw DomainError("excitation_probabilities: no event survives heralding and conditioning");

  ExcitationProbabilities out;
  out.terms = n;
  out.p.resize(num.size());
  for (std::size_t r = 0; r < num.size(); ++r) out.p[r] = num[r].value() / norm;
  out.truncation_error = last_term * tail_ratio / (1.0 - tail_ratio) / norm;
  return out;
}

ExcitationUncertainty propagate_uncertainty(const ChannelModel& ch, double sigma_mu, double d1, double finesse,
                                            double sigma_d1) {
  auto eval = [&](double mu, double depth) {
    ChannelModel c = ch;
    c.mu = mu;
    c.eta_w = write_efficiency(depth, finesse);
    const auto p = excitation_probabilities(c, 2);
    return std::pair{p.p[1], p.p[2]};
  };
  ExcitationUncertainty u;
  std::tie(u.P1, u.P2) = eval(ch.mu, d1);
  const double hm = 1e-5 * ch.mu;
  const auto [p1_mu_hi, p2_mu_hi] = eval(ch.mu + hm, d1);
  const auto [p1_mu_lo, p2_mu_lo] = eval(ch.mu - hm, d1);
  double dp1_dd = 0.0;
  double dp2_dd = 0.0;
  if (d1 > 0.0) {
    const double hd = 1e-5 * d1;
    const auto [p1_d_hi, p2_d_hi] = eval(ch.mu, d1 + hd);
    const auto [p1_d_lo, p2_d_lo] = eval(ch.mu, d1 - hd);
    dp1_dd = (p1_d_hi - p1_d_lo) / (2 * hd);
    dp2_dd = (p2_d_hi - p2_d_lo) / (2 * hd);
  }
  const double dp1_dmu = (p1_mu_hi - p1_mu_lo) / (2 * hm);
  const double dp2_dmu = (p2_mu_hi - p2_mu_lo) / (2 * hm);
  u.sigma_P1 = std::hypot(dp1_dmu * sigma_mu, dp1_dd * sigma_d1);
  u.sigma_P2 = std::hypot(dp2_dmu * sigma_mu, dp2_dd * sigma_d1);
  return u;
}

double estimate_mu_from_g2(double g2_ab) {
  if (!(g2_ab > 10.0)) throw DomainError("estimate_mu_from_g2: g2_ab must exceed 10 for mu = 1/g2 to hold");
  return 1.0 / g2_ab;
}

EtaEstimates estimate_etas(const CountRates& rates) {
  if (!(rates.S_a > 0.0) || !(rates.S_b > 0.0)) throw DomainError("estimate_etas: singles rates must be positive");
  if (!(rates.eta_Db > 0.0)) throw DomainError("estimate_etas: detector efficiency must be positive");
  if (rates.C_ab < 0.0) throw DomainError("estimate_etas: negative coincidence rate");
  return {rates.C_ab / rates.S_b, rates.C_ab / (rates.S_a * rates.eta_Db)};
}

double write_efficiency(double d1, double finesse) {
  if (d1 < 0.0) throw DomainError("write_efficiency: d1 must be >= 0");
  if (!(finesse >= 1.0)) throw DomainError("write_efficiency: finesse must be >= 1");
  return -std::expm1(-d1 / finesse);
}

double g2_from_probabilities(double p_joint, double p_1, double p_2) {
  if (!(p_1 > 0.0) || !(p_2 > 0.0)) throw DomainError("g2: marginal probabilities must be positive");
  return p_joint / (p_1 * p_2);
}

ExcitationTally monte_carlo_excitations(const ChannelModel& ch, long long trials, unsigned long long seed, int r_max,
                                        int workers) {
  validate(ch);
  if (trials < 0 || r_max < 0) throw DomainError("monte_carlo_excitations: negative trials or r_max");
  workers = std::max(1, workers);
  const double p_absorb = ch.eta_b * ch.eta_w;
  const double p_click = ch.eta_b * (1.0 - ch.eta_w) * ch.eta_t;

  std::vector<ExcitationTally> shards(static_cast<std::size_t>(workers));
  auto run_shard = [&](int w) {
    std::uint64_t state = seed;
    for (int i = 0; i <= w; ++i) splitmix64(state);
    std::mt19937_64 rng(splitmix64(state));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::geometric_distribution<int> extra_pairs(1.0 / (1.0 + ch.mu));
    auto draw_pairs = [&]() {
      if (ch.stats == StatsModel::thermal) return 1 + extra_pairs(rng);  // memoryless: n - 1 given n >= 1
      // Zero-truncated Poisson by inversion.
      const double u = u01(rng) * -std::expm1(-ch.mu);
      double pn = std::exp(-ch.mu) * ch.mu;
      double cdf = pn;
      int n = 1;
      while (cdf < u && n < kMaxPairNumber) {
        ++n;
        pn *= ch.mu / n;
        cdf += pn;
      }
      return n;
    };

    ExcitationTally& t = shards[static_cast<std::size_t>(w)];
    t.counts.assign(static_cast<std::size_t>(r_max) + 2, 0);  // last slot collects r > r_max
    const long long mine = trials / workers + (w < trials % workers ? 1 : 0);
    for (long long i = 0; i < mine; ++i) {
      const int n = draw_pairs();
      ++t.trials;
      bool heralded = false;
      for (int k = 0; k < n && !heralded; ++k) heralded = u01(rng) < ch.eta_a;
      if (!heralded) continue;
      ++t.heralded;
      int stored = 0;
      bool clicked = false;
      for (int k = 0; k < n; ++k) {
        const double u = u01(rng);
        if (u < p_absorb) {
          ++stored;
        } else if (u < p_absorb + p_click) {
          clicked = true;
        }
      }
      if (clicked) continue;
      ++t.counts[static_cast<std::size_t>(std::min(stored, r_max + 1))];
    }
  };

  if (workers == 1) {
    run_shard(0);
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(run_shard, w);
  }

  ExcitationTally sum;
  sum.counts.assign(static_cast<std::size_t>(r_max) + 2, 0);
  for (const auto& s : shards) {
    sum.trials += s.trials;
    sum.heralded += s.heralded;
    for (std::size_t r = 0; r < s.counts.size(); ++r) sum.counts[r] += s.counts[r];
  }
  return sum;
}

}  // namespace afc
