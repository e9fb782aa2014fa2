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

#ifndef AFC_DEPTH_BOUND_HPP
#define AFC_DEPTH_BOUND_HPP

// Upper bounds on the echo contrast R achievable with entanglement depth M,
// given the one- and two-excitation probabilities P1 and P2, and the inverse
// problem: the smallest depth compatible with a measured R.
//
// The candidate states are mixtures  rho = sum_t q_t |psi_t><psi_t|  over
//
//   psi_i = (alpha_i |0>^M + beta_i |W>_M)^{(x) i} (x) |0>^{N - iM},  i = 1..k,
//
// with k = floor(N / M). When N = kM + k' with k' > 0 the family also holds
// the remainder member, in which the k blocks are followed by a k'-tooth
// factor (alpha' |0> + beta' |W>_{k'}). Its odds are slaved,
//
//   beta'^2 / alpha'^2 = (k' / M) * beta^2 / alpha^2,
//
// which makes every one of the N tooth amplitudes of the single-excitation
// component equal, i.e. that component is proportional to |W>_N.
//
// For a member with single-excitation weight w1, two-excitation weight w2 and
// single-sector collective emission num = <S+ S-> restricted to one
// excitation, the mixture has
//
//   P1 = sum q w1,   P2 = sum q w2,   R = sum q num / (P1 + 2 P2).
//
// For plain members w1 = i b (1-b)^{i-1}, w2 = C(i,2) b^2 (1-b)^{i-2} and
// num = M i^2 b (1-b)^{i-1} with b = beta^2. For the remainder member
// (b' = beta'^2):
//
//   w1  = k b (1-b)^{k-1} (1-b') + b' (1-b)^k
//   w2  = C(k,2) b^2 (1-b)^{k-2} (1-b') + k b (1-b)^{k-1} b'
//   num = N w1
//
// where the last line holds because the single-excitation component is
// proportional to |W>_N.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "afc/errors.hpp"
#include "afc/numeric.hpp"

namespace afc {

struct BoundProblem {
  int N = 1;
  int M = 1;
  double P1 = 0.0;
  double P2 = 0.0;
};

void validate(const BoundProblem& prob);

/// One member of the block family: `blocks` W_M factors, plus an optional
/// remainder factor of `remainder` teeth (0 for plain members).
struct FamilyTerm {
  int blocks = 1;
  int remainder = 0;
};

template <typename Scalar>
struct TermValues {
  Scalar w1;
  Scalar w2;
  Scalar num;
};

/// Odds-slaved excitation weight of the remainder factor.
template <typename Scalar>
Scalar remainder_beta_sq(int M, int remainder, const Scalar& b) {
  const Scalar one(1.0);
  return Scalar(static_cast<double>(remainder)) * b /
         (Scalar(static_cast<double>(M)) * (one - b) + Scalar(static_cast<double>(remainder)) * b);
}

/// (w1, w2, num) of a family member at excitation weight b = beta^2.
template <typename Scalar>
TermValues<Scalar> term_values(const FamilyTerm& term, int M, const Scalar& b) {
  const Scalar one(1.0);
  const Scalar a = one - b;
  const int i = term.blocks;
  const double pairs = 0.5 * i * (i - 1);
  if (term.remainder == 0) {
    const Scalar a_im1 = powi(a, i - 1);
    const Scalar w1 = Scalar(static_cast<double>(i)) * b * a_im1;
    const Scalar w2 = i >= 2 ? Scalar(pairs) * b * b * powi(a, i - 2) : Scalar(0.0);
    const Scalar num = Scalar(static_cast<double>(M) * i * i) * b * a_im1;
    return {w1, w2, num};
  }
  const int kp = term.remainder;
  const Scalar denom = Scalar(static_cast<double>(M)) * a + Scalar(static_cast<double>(kp)) * b;
  const Scalar b_rem = Scalar(static_cast<double>(kp)) * b / denom;
  const Scalar a_rem = Scalar(static_cast<double>(M)) * a / denom;
  const Scalar a_im1 = powi(a, i - 1);
  const Scalar w1 = Scalar(static_cast<double>(i)) * b * a_im1 * a_rem + b_rem * (a_im1 * a);
  Scalar w2 = Scalar(static_cast<double>(i)) * b * a_im1 * b_rem;
  if (i >= 2) w2 = w2 + Scalar(pairs) * b * b * powi(a, i - 2) * a_rem;
  const Scalar num = Scalar(static_cast<double>(i * M + kp)) * w1;
  return {w1, w2, num};
}

/// The members available at depth M for N teeth.
class BlockFamily {
 public:
  BlockFamily(int N, int M);

  int N() const { return N_; }
  int M() const { return M_; }
  int k() const { return k_; }
  int remainder() const { return kprime_; }
  std::size_t size() const { return terms_.size(); }
  const FamilyTerm& term(std::size_t t) const { return terms_[t]; }
  std::span<const FamilyTerm> terms() const { return terms_; }

  /// Index of psi_1 (the single W_M block).
  std::size_t single_block_index() const { return 0; }
  /// Index of the member covering all N teeth (remainder member when k' > 0,
  /// psi_k otherwise).
  std::size_t full_cover_index() const { return terms_.size() - 1; }

  std::string describe(std::size_t t) const;

 private:
  int N_;
  int M_;
  int k_;
  int kprime_;
  std::vector<FamilyTerm> terms_;
};

/// Mixture weights and excitation weights, both indexed by family member.
struct MixedBlockState {
  Eigen::VectorXd q;
  Eigen::VectorXd beta_sq;
};

struct FamilyTotals {
  double P1 = 0.0;
  double P2 = 0.0;
  double emission = 0.0;  // sum q * num
};

FamilyTotals family_totals(const BlockFamily& family, const MixedBlockState& state);

/// Throws DomainError unless the weights form a distribution and every
/// beta^2 lies in [0, 1].
void validate(const BlockFamily& family, const MixedBlockState& state);

/// R of a mixture, with the denominator P1 + 2 P2 taken from `prob`.
double family_R(const MixedBlockState& state, const BoundProblem& prob);
double family_P1(const MixedBlockState& state, const BoundProblem& prob);
double family_P2(const MixedBlockState& state, const BoundProblem& prob);

/// Largest P2 any mixture of the family reaches at the given P1 (upper
/// concave envelope of the members' (w1, w2) curves, sampled).
double max_feasible_P2(int N, int M, double P1);

/// Closed-form linear estimate of the depth: R - sqrt(2 P2) N / P1.
double linear_bound(double R, double P1, double P2, int N);

struct SolverOptions {
  int random_starts = 200;
  bool structured_start = true;
  std::uint64_t seed = 0;
  double constraint_tol = 1e-10;  // relative residual on P1 and P2
  double objective_rtol = 1e-12;
  int max_outer = 60;
  int max_inner = 300;
};

struct StartRecord {
  int index = 0;
  bool structured = false;
  bool converged = false;
  double R = 0.0;
  double constraint_residual = 0.0;
  int iterations = 0;
};

struct MaxRResult {
  double R = 0.0;
  MixedBlockState state;
  double constraint_residual = 0.0;
  std::vector<StartRecord> starts;
  std::vector<std::string> active_constraints;
  /// True when M = N: the depth constraint is vacuous and R is the ceiling
  /// N P1 / (P1 + 2 P2) that no state can exceed.
  bool depth_unconstrained = false;
  int converged_starts = 0;
};

/// Global maximum of R over the family at depth M subject to P1 and P2, by a
/// multi-start augmented-Lagrangian local solver. Throws InfeasibleError if
/// the constraints cannot be met.
MaxRResult max_R(const BoundProblem& prob, const SolverOptions& options = {});

/// Same maximum restricted to mixtures of psi_1 and the full-cover member,
/// where the two constraints leave a one-dimensional search.
MaxRResult max_R_reduced(const BoundProblem& prob);

/// Local solve from one given start; exposed for tests and diagnostics.
StartRecord solve_from(const BoundProblem& prob, MixedBlockState& state, const SolverOptions& options = {});

struct DepthBoundResult {
  int M_lower = 0;
  double R_max_at_M = 0.0;
  std::optional<double> R_max_below;  // max_R(M_lower - 1)
  double R_input = 0.0;
  double sigma_R = 0.0;
  int M_lower_minus = 0;  // from R - sigma
  int M_lower_plus = 0;   // from R + sigma
  int N = 0;
  double P1 = 0.0;
  double P2 = 0.0;
  double linear_estimate = 0.0;
  MaxRResult solver;  // diagnostics of max_R at M_lower
  int max_R_calls = 0;
};

/// Caches max_R per depth for one (N, P1, P2).
class DepthBounder {
 public:
  DepthBounder(int N, double P1, double P2, SolverOptions options = {});

  const MaxRResult& at(int M);
  /// Smallest M whose max_R reaches R (monotone bisection on M).
  int minimal_depth(double R);
  int calls() const { return calls_; }
  int N() const { return N_; }

 private:
  int N_;
  double P1_;
  double P2_;
  SolverOptions options_;
  std::map<int, MaxRResult> cache_;
  int calls_ = 0;
};

DepthBoundResult certify_depth(double R, double sigma_R, int N, double P1, double P2,
                               const SolverOptions& options = {});

struct CurvePoint {
  int M = 0;
  double max_R = 0.0;
};

std::vector<CurvePoint> bound_curve(int N, double P1, double P2, std::span<const int> M_list,
                                    const SolverOptions& options = {});

}  // namespace afc

#endif  // AFC_DEPTH_BOUND_HPP
