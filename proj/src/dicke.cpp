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

#include "afc/dicke.hpp"

#include <bit>
#include <cmath>
#include <string>

namespace afc {

namespace {

void require_oracle_size(int M, const char* what) {
  if (M < 1) throw DomainError(std::string(what) + ": need at least one tooth");
  if (M > kMaxOracleTeeth) {
    throw CapacityError(std::string(what) + ": " + std::to_string(M) + " teeth exceeds the full-space limit of " +
                        std::to_string(kMaxOracleTeeth));
  }
}

}  // namespace

ToothAmplitudes w_state(int M) {
  if (M < 1) throw DomainError("w_state: M must be >= 1");
  return ToothAmplitudes::Constant(M, std::complex<double>(1.0 / std::sqrt(static_cast<double>(M)), 0.0));
}

SparseOperator splus_sminus_matrix(int M) {
  require_oracle_size(M, "splus_sminus_matrix");
  const Eigen::Index dim = Eigen::Index{1} << M;
  std::vector<Eigen::Triplet<std::complex<double>>> entries;
  entries.reserve(static_cast<std::size_t>(dim) * static_cast<std::size_t>(M));
  for (Eigen::Index y = 0; y < dim; ++y) {
    const auto uy = static_cast<unsigned long>(y);
    const int excitations = std::popcount(uy);
    if (excitations > 0) entries.emplace_back(y, y, static_cast<double>(excitations));
    for (int l = 0; l < M; ++l) {
      if (!(uy >> l & 1UL)) continue;
      const unsigned long lowered = uy ^ (1UL << l);
      for (int j = 0; j < M; ++j) {
        if (j == l || (lowered >> j & 1UL)) continue;
        entries.emplace_back(static_cast<Eigen::Index>(lowered | (1UL << j)), y, 1.0);
      }
    }
  }
  SparseOperator op(dim, dim);
  op.setFromTriplets(entries.begin(), entries.end());
  return op;
}

std::vector<Eigen::Index> single_excitation_indices(int M) {
  require_oracle_size(M, "single_excitation_indices");
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(M));
  for (int j = 0; j < M; ++j) idx[static_cast<std::size_t>(j)] = Eigen::Index{1} << j;
  return idx;
}

Eigen::MatrixXcd single_excitation_block(const SparseOperator& op, int M) {
  const auto idx = single_excitation_indices(M);
  if (op.rows() != (Eigen::Index{1} << M)) throw DomainError("single_excitation_block: operator size mismatch");
  Eigen::MatrixXcd block(M, M);
  for (int a = 0; a < M; ++a) {
    for (int b = 0; b < M; ++b) block(a, b) = op.coeff(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
  }
  return block;
}

SmallSystemState product_state(std::span<const BlockFactor> blocks, std::optional<int> total_teeth) {
  int used = 0;
  for (const auto& b : blocks) {
    if (b.size < 1) throw DomainError("product_state: block size must be >= 1");
    used += b.size;
  }
  const int M = total_teeth.value_or(used);
  if (M < used) throw DomainError("product_state: blocks exceed total tooth count");
  require_oracle_size(M, "product_state");

  SmallSystemState psi = SmallSystemState::Zero(Eigen::Index{1} << M);
  // Enumerate the non-vacuum pattern of each block: either all-|0> or one of
  // its teeth excited with amplitude excited / sqrt(size).
  std::vector<std::pair<Eigen::Index, std::complex<double>>> partial{{0, {1.0, 0.0}}};
  int offset = 0;
  for (const auto& b : blocks) {
    std::vector<std::pair<Eigen::Index, std::complex<double>>> next;
    next.reserve(partial.size() * static_cast<std::size_t>(b.size + 1));
    const std::complex<double> per_tooth = b.excited / std::sqrt(static_cast<double>(b.size));
    for (const auto& [index, amp] : partial) {
      next.emplace_back(index, amp * b.vacuum);
      for (int t = 0; t < b.size; ++t) next.emplace_back(index | (Eigen::Index{1} << (offset + t)), amp * per_tooth);
    }
    partial = std::move(next);
    offset += b.size;
  }
  for (const auto& [index, amp] : partial) psi(index) += amp;
  return psi;
}

SmallSystemState embed_single_excitation(const ToothAmplitudes& c) {
  const int M = static_cast<int>(c.size());
  require_oracle_size(M, "embed_single_excitation");
  const double weight = c.squaredNorm();
  if (weight > 1.0 + 1e-12) throw DomainError("embed_single_excitation: sum |c_j|^2 exceeds 1");
  SmallSystemState psi = SmallSystemState::Zero(Eigen::Index{1} << M);
  psi(0) = std::sqrt(std::max(0.0, 1.0 - weight));
  for (int j = 0; j < M; ++j) psi(Eigen::Index{1} << j) = c(j);
  return psi;
}

int teeth_of(const SmallSystemState& psi) {
  const auto dim = static_cast<unsigned long>(psi.size());
  if (dim == 0 || !std::has_single_bit(dim)) throw DomainError("state dimension is not a power of two");
  return std::countr_zero(dim);
}

Eigen::VectorXd excitation_weights(const SmallSystemState& psi, int M) {
  if (psi.size() != (Eigen::Index{1} << M)) throw DomainError("excitation_weights: state size mismatch");
  Eigen::VectorXd w = Eigen::VectorXd::Zero(M + 1);
  for (Eigen::Index i = 0; i < psi.size(); ++i) w(std::popcount(static_cast<unsigned long>(i))) += std::norm(psi(i));
  return w;
}

SmallSystemState apply_sminus(const SmallSystemState& psi, int M) {
  if (psi.size() != (Eigen::Index{1} << M)) throw DomainError("apply_sminus: state size mismatch");
  SmallSystemState out = SmallSystemState::Zero(psi.size());
  for (Eigen::Index i = 0; i < psi.size(); ++i) {
    if (psi(i) == std::complex<double>{}) continue;
    for (int j = 0; j < M; ++j) {
      if (i >> j & 1) out(i ^ (Eigen::Index{1} << j)) += psi(i);
    }
  }
  return out;
}

double splus_sminus_expectation(const SmallSystemState& psi, int M, std::optional<int> sector) {
  SmallSystemState source = psi;
  if (sector) {
    for (Eigen::Index i = 0; i < source.size(); ++i) {
      if (std::popcount(static_cast<unsigned long>(i)) != *sector) source(i) = 0.0;
    }
  }
  return apply_sminus(source, M).squaredNorm();
}

}  // namespace afc
