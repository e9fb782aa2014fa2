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

#ifndef AFC_DICKE_HPP
#define AFC_DICKE_HPP

// Collective dipole algebra for a comb of N teeth, each treated as a qubit
// (|0> = no excitation in the tooth, |1> = one shared excitation).
//
// Tooth j carries detuning j * Delta, j = 0 .. N-1. Production code works in
// the N-dimensional single-excitation sector; the 2^M full-space builders
// below exist for oracles and are capped at kMaxOracleTeeth.

#include <complex>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "afc/errors.hpp"

namespace afc {

/// Single-excitation amplitudes c_j over the teeth; sum |c_j|^2 <= 1, the rest
/// is vacuum weight.
using ToothAmplitudes = Eigen::VectorXcd;

/// Amplitudes over the 2^M computational basis; bit j of the index is tooth j.
using SmallSystemState = Eigen::VectorXcd;

using SparseOperator = Eigen::SparseMatrix<std::complex<double>>;

inline constexpr int kMaxOracleTeeth = 14;

/// The W (lowest Dicke) state over M teeth: c_j = 1 / sqrt(M).
ToothAmplitudes w_state(int M);

/// R = |sum_j c_j|^2 / sum_j |c_j|^2, the contrast of a state confined to the
/// single-excitation sector.
template <typename Derived>
double echo_contrast_single_excitation(const Eigen::MatrixBase<Derived>& c) {
  const double weight = c.squaredNorm();
  if (!(weight > 0.0)) throw DomainError("echo contrast: amplitudes carry no excitation");
  return std::norm(c.sum()) / weight;
}

/// Contrast after each tooth amplitude picked up a phase phi_j.
template <typename DerivedC, typename DerivedPhi>
double dephased_contrast(const Eigen::MatrixBase<DerivedC>& c, const Eigen::MatrixBase<DerivedPhi>& phases) {
  if (c.size() != phases.size()) throw DomainError("dephased_contrast: phases length differs from tooth count");
  const double weight = c.squaredNorm();
  if (!(weight > 0.0)) throw DomainError("dephased_contrast: amplitudes carry no excitation");
  std::complex<double> s{0.0, 0.0};
  for (Eigen::Index j = 0; j < c.size(); ++j) {
    s += std::complex<double>(c(j)) * std::polar(1.0, static_cast<double>(phases(j)));
  }
  return std::norm(s) / weight;
}

/// S+ S- with S- = sum_j |0><1|_j on the full 2^M space. Stored sparse: the
/// dense 2^14 complex matrix would need 4 GiB.
SparseOperator splus_sminus_matrix(int M);

/// Basis indices of the single-excitation sector, tooth order.
std::vector<Eigen::Index> single_excitation_indices(int M);

/// Dense restriction of a full-space operator to the single-excitation sector.
Eigen::MatrixXcd single_excitation_block(const SparseOperator& op, int M);

/// One factor alpha |0..0>_m + beta |W>_m of a product state.
struct BlockFactor {
  int size = 1;
  std::complex<double> vacuum{1.0, 0.0};
  std::complex<double> excited{0.0, 0.0};
};

/// Tensor product of block factors; the first block occupies the lowest tooth
/// indices. Remaining teeth up to `total_teeth` (if given) are in |0>.
SmallSystemState product_state(std::span<const BlockFactor> blocks, std::optional<int> total_teeth = std::nullopt);

/// Embed single-excitation amplitudes into the full space (vacuum weight fills
/// the remainder so the state is normalized).
SmallSystemState embed_single_excitation(const ToothAmplitudes& c);

/// Probability of finding exactly r excitations, r = 0 .. M.
Eigen::VectorXd excitation_weights(const SmallSystemState& psi, int M);

/// S- |psi>.
SmallSystemState apply_sminus(const SmallSystemState& psi, int M);

/// <psi| S+ S- |psi>, optionally restricted to one excitation-number sector
/// (S+ S- conserves the excitation number, so the restriction is exact).
double splus_sminus_expectation(const SmallSystemState& psi, int M, std::optional<int> sector = std::nullopt);

/// Number of teeth of a full-space state.
int teeth_of(const SmallSystemState& psi);

}  // namespace afc

#endif  // AFC_DICKE_HPP
