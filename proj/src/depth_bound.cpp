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

#include "afc/depth_bound.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <tuple>

namespace afc {

void validate(const BoundProblem& prob) {
  if (prob.N < 1) throw DomainError("bound: N must be >= 1");
  if (prob.M < 1 || prob.M > prob.N) throw DomainError("bound: M must lie in [1, N]");
  if (!(prob.P1 > 0.0) || prob.P1 > 1.0) throw DomainError("bound: P1 must lie in (0, 1]");
  if (!(prob.P2 >= 0.0) || prob.P2 > prob.P1) throw DomainError("bound: P2 must lie in [0, P1]");
  if (prob.P1 + prob.P2 > 1.0) throw DomainError("bound: P1 + P2 must not exceed 1");
}

BlockFamily::BlockFamily(int N, int M) : N_(N), M_(M) {
  if (N < 1 || M < 1 || M > N) throw DomainError("BlockFamily: need 1 <= M <= N");
  k_ = N / M;
  kprime_ = N % M;
  for (int i = 1; i <= k_; ++i) terms_.push_back({i, 0});
  if (kprime_ > 0) terms_.push_back({k_, kprime_});
}

std::string BlockFamily::describe(std::size_t t) const {
  std::ostringstream os;
  const FamilyTerm& term = terms_.at(t);
  os << "psi_" << term.blocks;
  if (term.remainder > 0) os << "+r" << term.remainder;
  return os.str();
}

FamilyTotals family_totals(const BlockFamily& family, const MixedBlockState& state) {
  if (state.q.size() != static_cast<Eigen::Index>(family.size()) ||
      state.beta_sq.size() != static_cast<Eigen::Index>(family.size())) {
    throw DomainError("family_totals: state size does not match the family");
  }
  CompensatedSum<> p1;
  CompensatedSum<> p2;
  CompensatedSum<> em;
  for (std::size_t t = 0; t < family.size(); ++t) {
    const double q = state.q[static_cast<Eigen::Index>(t)];
    if (q == 0.0) continue;
    const auto v = term_values(family.term(t), family.M(), state.beta_sq[static_cast<Eigen::Index>(t)]);
    p1 += q * v.w1;
    p2 += q * v.w2;
    em += q * v.num;
  }
  return {p1.value(), p2.value(), em.value()};
}

void validate(const BlockFamily& family, const MixedBlockState& state) {
  const auto n = static_cast<Eigen::Index>(family.size());
  if (state.q.size() != n || state.beta_sq.size() != n) throw DomainError("state size does not match the family");
  if ((state.q.array() < 0.0).any()) throw DomainError("mixture weights must be non-negative");
  if (std::abs(state.q.sum() - 1.0) > 1e-9) throw DomainError("mixture weights must sum to 1");
  if ((state.beta_sq.array() < 0.0).any() || (state.beta_sq.array() > 1.0).any()) {
    throw DomainError("beta^2 must lie in [0, 1]");
  }
}

namespace {

FamilyTotals totals_for(const MixedBlockState& state, const BoundProblem& prob) {
  validate(prob);
  return family_totals(BlockFamily(prob.N, prob.M), state);
}

}  // namespace

double family_R(const MixedBlockState& state, const BoundProblem& prob) {
  return totals_for(state, prob).emission / (prob.P1 + 2.0 * prob.P2);
}

double family_P1(const MixedBlockState& state, const BoundProblem& prob) { return totals_for(state, prob).P1; }

double family_P2(const MixedBlockState& state, const BoundProblem& prob) { return totals_for(state, prob).P2; }

double linear_bound(double R, double P1, double P2, int N) {
  if (!(P1 > 0.0) || P2 < 0.0 || N < 1) throw DomainError("linear_bound: need P1 > 0, P2 >= 0, N >= 1");
  return R - std::sqrt(2.0 * P2) * N / P1;
}

double max_feasible_P2(int N, int M, double P1) {
  if (!(P1 > 0.0) || P1 > 1.0) throw DomainError("max_feasible_P2: P1 must lie in (0, 1]");
  const BlockFamily family(N, M);
  constexpr int kSamples = 2048;
  std::vector<std::pair<double, double>> pts;
  pts.reserve(family.size() * kSamples + 1);
  pts.emplace_back(0.0, 0.0);
  for (const FamilyTerm& term : family.terms()) {
    for (int s = 1; s <= kSamples; ++s) {
      // Quadratic spacing resolves the small-b region where large blocks peak.
      const double u = static_cast<double>(s) / kSamples;
      const auto v = term_values(term, M, u * u);
      pts.emplace_back(v.w1, v.w2);
    }
  }
  std::sort(pts.begin(), pts.end());
  // Upper hull, left to right.
  std::vector<std::pair<double, double>> hull;
  for (const auto& p : pts) {
    while (hull.size() >= 2) {
      const auto& a = hull[hull.size() - 2];
      const auto& b = hull.back();
      const double cross = (b.first - a.first) * (p.second - a.second) - (b.second - a.second) * (p.first - a.first);
      if (cross >= 0.0) {
        hull.pop_back();
      } else {
        break;
      }
    }
    hull.push_back(p);
  }
  if (P1 > hull.back().first) return -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < hull.size(); ++i) {
    if (hull[i].first >= P1) {
      const auto& a = hull[i - 1];
      const auto& b = hull[i];
      if (b.first == a.first) return std::max(a.second, b.second);
      const double f = (P1 - a.first) / (b.first - a.first);
      return a.second + f * (b.second - a.second);
    }
  }
  return hull.back().second;
}

namespace {

MaxRResult ceiling_result(const BoundProblem& prob, const BlockFamily& family) {
  MaxRResult out;
  out.state.q = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(family.size()));
  out.state.beta_sq = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(family.size()));
  out.state.q[0] = 1.0;
  out.state.beta_sq[0] = prob.P1;
  out.depth_unconstrained = true;
  out.R = prob.N * prob.P1 / (prob.P1 + 2.0 * prob.P2);
  out.active_constraints.push_back("depth constraint vacuous (M = N)");
  return out;
}

MaxRResult single_excitation_result(const BoundProblem& prob, const BlockFamily& family) {
  MaxRResult out;
  out.state.q = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(family.size()));
  out.state.beta_sq = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(family.size()));
  out.state.q[0] = 1.0;
  out.state.beta_sq[0] = prob.P1;
  out.R = prob.M;
  out.active_constraints.push_back("P2 = 0");
  return out;
}

}  // namespace

MaxRResult max_R_reduced(const BoundProblem& prob) {
  validate(prob);
  const BlockFamily family(prob.N, prob.M);
  if (prob.P2 == 0.0) return single_excitation_result(prob, family);
  if (prob.M == prob.N) return ceiling_result(prob, family);

  const std::size_t top = family.full_cover_index();
  const FamilyTerm top_term = family.term(top);
  const int M = prob.M;
  const double P1 = prob.P1;
  const double P2 = prob.P2;
  const double denom = P1 + 2.0 * P2;
  auto w1_top = [&](double b) { return term_values(top_term, M, b).w1; };
  auto w2_top = [&](double b) { return term_values(top_term, M, b).w2; };

  // Peak of w2 for the full-cover member.
  double b_peak = 0.0;
  double w2_peak = 0.0;
  {
    constexpr int kScan = 4096;
    int best = 0;
    for (int s = 1; s <= kScan; ++s) {
      const double w = w2_top(static_cast<double>(s) / kScan);
      if (w > w2_peak) {
        w2_peak = w;
        best = s;
      }
    }
    const double lo = static_cast<double>(std::max(best - 1, 0)) / kScan;
    const double hi = static_cast<double>(std::min(best + 1, kScan)) / kScan;
    std::tie(b_peak, w2_peak) = golden_section_maximize(w2_top, lo, hi, 1e-15);
  }
  const double qa_min = P2 / w2_peak;
  if (qa_min >= 1.0) throw InfeasibleError("max_R_reduced: P2 exceeds what the reduced family can reach");

  struct Point {
    double R = -std::numeric_limits<double>::infinity();
    double ba = 0.0;
    double b1 = 0.0;
  };
  // Both branches of w2 = P2 / qa are tried; the better feasible one wins.
  auto evaluate = [&](double qa) {
    Point best;
    if (!(qa >= qa_min) || !(qa < 1.0)) return best;
    const double target = P2 / qa;
    for (int branch = 0; branch < 2; ++branch) {
      const double lo = branch == 0 ? 0.0 : b_peak;
      const double hi = branch == 0 ? b_peak : 1.0;
      const auto g = [&](double b) { return w2_top(b) - target; };
      if ((g(lo) > 0.0) == (g(hi) > 0.0) && g(lo) != 0.0 && g(hi) != 0.0) continue;
      const double ba = bisect_root(g, lo, hi);
      const double rest = P1 - qa * w1_top(ba);
      const double b1 = rest / (1.0 - qa);
      if (b1 < 0.0 || b1 > 1.0) continue;
      const double R = (M * rest + qa * term_values(top_term, M, ba).num) / denom;
      if (R > best.R) best = {R, ba, b1};
    }
    return best;
  };

  std::vector<double> grid;
  constexpr int kLinear = 2000;
  constexpr int kLog = 2000;
  for (int s = 0; s <= kLinear; ++s) grid.push_back(qa_min + (1.0 - qa_min) * s / kLinear);
  const double span = 1.0 - qa_min;
  for (int s = 0; s <= kLog; ++s) {
    const double gap = span * std::pow(1e-14, static_cast<double>(s) / kLog);
    grid.push_back(1.0 - gap);
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  std::size_t best_i = grid.size();
  Point best;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Point p = evaluate(grid[i]);
    if (p.R > best.R) {
      best = p;
      best_i = i;
    }
  }
  if (best_i == grid.size()) throw InfeasibleError("max_R_reduced: no feasible mixture of psi_1 and the full-cover member");

  const double lo = grid[best_i == 0 ? 0 : best_i - 1];
  const double hi = grid[std::min(best_i + 1, grid.size() - 1)];
  const auto [qa, R] = golden_section_maximize([&](double x) { return evaluate(x).R; }, lo, hi, 1e-16);
  double qa_best = grid[best_i];
  if (R > best.R) {
    best = evaluate(qa);
    qa_best = qa;
  }

  MaxRResult out;
  out.state.q = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(family.size()));
  out.state.beta_sq = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(family.size()));
  out.state.q[0] = 1.0 - qa_best;
  out.state.beta_sq[0] = best.b1;
  out.state.q[static_cast<Eigen::Index>(top)] = qa_best;
  out.state.beta_sq[static_cast<Eigen::Index>(top)] = best.ba;
  const FamilyTotals tot = family_totals(family, out.state);
  out.R = tot.emission / denom;
  out.constraint_residual = std::max(std::abs(tot.P1 / P1 - 1.0), std::abs(tot.P2 / P2 - 1.0));
  if (best.b1 >= 1.0 - 1e-12) out.active_constraints.push_back("beta_1^2 = 1");
  out.converged_starts = 1;
  out.starts.push_back({0, true, true, out.R, out.constraint_residual, 0});
  return out;
}

DepthBounder::DepthBounder(int N, double P1, double P2, SolverOptions options)
    : N_(N), P1_(P1), P2_(P2), options_(options) {
  validate(BoundProblem{N, 1, P1, P2});
}

const MaxRResult& DepthBounder::at(int M) {
  auto it = cache_.find(M);
  if (it != cache_.end()) return it->second;
  ++calls_;
  MaxRResult r;
  try {
    r = max_R(BoundProblem{N_, M, P1_, P2_}, options_);
  } catch (const InfeasibleError&) {
    r.R = -std::numeric_limits<double>::infinity();
  }
  return cache_.emplace(M, std::move(r)).first->second;
}

int DepthBounder::minimal_depth(double R) {
  if (at(1).R >= R) return 1;
  if (at(N_).R < R) return N_ + 1;
  int lo = 1;
  int hi = N_;
  while (hi - lo > 1) {
    const int mid = lo + (hi - lo) / 2;
    if (at(mid).R >= R) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

DepthBoundResult certify_depth(double R, double sigma_R, int N, double P1, double P2, const SolverOptions& options) {
  if (!(R >= 0.0) || !(sigma_R >= 0.0)) throw DomainError("certify_depth: need R >= 0 and sigma_R >= 0");
  if (R > N) throw DomainError("certify_depth: R cannot exceed N");
  DepthBounder bounder(N, P1, P2, options);
  const double ceiling = bounder.at(N).R;
  if (R > ceiling * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "certify_depth: R = " << R << " exceeds the largest value " << ceiling
       << " compatible with P1 and P2 at any depth";
    throw InconsistentError(os.str());
  }
  DepthBoundResult out;
  out.R_input = R;
  out.sigma_R = sigma_R;
  out.N = N;
  out.P1 = P1;
  out.P2 = P2;
  out.M_lower = std::min(bounder.minimal_depth(R), N);
  out.M_lower_minus = std::min(bounder.minimal_depth(std::max(R - sigma_R, 0.0)), N);
  out.M_lower_plus = std::min(bounder.minimal_depth(R + sigma_R), N);
  out.solver = bounder.at(out.M_lower);
  out.R_max_at_M = out.solver.R;
  if (out.M_lower > 1) out.R_max_below = bounder.at(out.M_lower - 1).R;
  out.linear_estimate = linear_bound(R, P1, P2, N);
  out.max_R_calls = bounder.calls();
  return out;
}

std::vector<CurvePoint> bound_curve(int N, double P1, double P2, std::span<const int> M_list,
                                    const SolverOptions& options) {
  DepthBounder bounder(N, P1, P2, options);
  std::vector<CurvePoint> out;
  out.reserve(M_list.size());
  for (int M : M_list) {
    if (M < 1 || M > N) throw DomainError("bound_curve: M outside [1, N]");
    out.push_back({M, bounder.at(M).R});
  }
  return out;
}

}  // namespace afc
