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

// Multi-start augmented-Lagrangian maximisation of R over the block family.
//
// Variables are x = (q_0..q_{T-1}, b_0..b_{T-1}) with box bounds [0, 1]. The
// problem is posed as minimising f = -R / N subject to
//
//   c0 = sum q - 1,  c1 = P1(x) / P1 - 1,  c2 = P2(x) / P2 - 1.
//
// Each subproblem is solved by a projected, Levenberg-damped Newton method.
// The Hessian of the Lagrangian is block diagonal (one 2x2 block per member)
// plus the rank-3 penalty term rho J^T J; small free sets use it exactly,
// large ones use an absolute-eigenvalue block approximation and Woodbury.
// A final Newton solve of the KKT system on the support polishes the point.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

#include "afc/depth_bound.hpp"

namespace afc {
namespace {

using Eigen::Index;
using Eigen::Matrix2d;
using Eigen::MatrixXd;
using Eigen::Vector3d;
using Eigen::VectorXd;

constexpr int kDenseLimit = 96;

struct TermEval {
  double f = 0, fd = 0, fdd = 0;    // -num / (N D)
  double c1 = 0, c1d = 0, c1dd = 0;  // w1 / P1
  double c2 = 0, c2d = 0, c2dd = 0;  // w2 / P2
};

class Lagrangian {
 public:
  explicit Lagrangian(const BoundProblem& prob)
      : prob_(prob), family_(prob.N, prob.M), T_(static_cast<Index>(family_.size())) {
    obj_scale_ = -1.0 / (prob.N * (prob.P1 + 2.0 * prob.P2));
  }

  const BlockFamily& family() const { return family_; }
  Index terms() const { return T_; }

  // With support_only set, members at q = 0 are skipped (their entries are
  // left stale); the totals never read them.
  void evaluate_terms(const VectorXd& x, std::vector<TermEval>& out, bool support_only = false) const {
    out.resize(static_cast<std::size_t>(T_));
    for (Index t = 0; t < T_; ++t) {
      if (support_only && x[t] == 0.0) continue;
      const auto v = term_values(family_.term(static_cast<std::size_t>(t)), prob_.M,
                                 Jet2<double>::variable(x[T_ + t]));
      TermEval& e = out[static_cast<std::size_t>(t)];
      e.f = obj_scale_ * v.num.v;
      e.fd = obj_scale_ * v.num.d;
      e.fdd = obj_scale_ * v.num.dd;
      e.c1 = v.w1.v / prob_.P1;
      e.c1d = v.w1.d / prob_.P1;
      e.c1dd = v.w1.dd / prob_.P1;
      e.c2 = v.w2.v / prob_.P2;
      e.c2d = v.w2.d / prob_.P2;
      e.c2dd = v.w2.dd / prob_.P2;
    }
  }

  // Objective and constraint values from per-term values.
  std::pair<double, Vector3d> values(const VectorXd& x, const std::vector<TermEval>& e) const {
    CompensatedSum<> f, s0, s1, s2;
    for (Index t = 0; t < T_; ++t) {
      const double q = x[t];
      if (q == 0.0) continue;
      const TermEval& k = e[static_cast<std::size_t>(t)];
      f += q * k.f;
      s0 += q;
      s1 += q * k.c1;
      s2 += q * k.c2;
    }
    return {f.value(), Vector3d(s0.value() - 1.0, s1.value() - 1.0, s2.value() - 1.0)};
  }

  double merit(const VectorXd& x, const Vector3d& lambda, double rho, std::vector<TermEval>& scratch) const {
    evaluate_terms(x, scratch, true);
    const auto [f, c] = values(x, scratch);
    return f + lambda.dot(c) + 0.5 * rho * c.squaredNorm();
  }

  double R_of(const VectorXd& x) const {
    std::vector<TermEval> e;
    evaluate_terms(x, e, true);
    return -values(x, e).first * prob_.N;
  }

  Vector3d constraints(const VectorXd& x) const {
    std::vector<TermEval> e;
    evaluate_terms(x, e, true);
    return values(x, e).second;
  }

 private:
  BoundProblem prob_;
  BlockFamily family_;
  Index T_;
  double obj_scale_;
};

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

struct InnerStats {
  int iterations = 0;
  double projected_gradient = 0.0;
};

// Projected damped-Newton minimisation of the augmented Lagrangian.
InnerStats minimize_inner(const Lagrangian& L, VectorXd& x, const Vector3d& lambda, double rho, double omega,
                          int max_iter) {
  const Index T = L.terms();
  const Index n = 2 * T;
  std::vector<TermEval> e;
  std::vector<TermEval> scratch;
  VectorXd g(n);
  MatrixXd J(3, n);
  VectorXd hqb(T), hbb(T);
  double tau = 1e-8;
  int stagnant = 0;
  double last_pg_outside = 1.0;
  InnerStats stats;
  for (int it = 0; it < max_iter; ++it) {
    stats.iterations = it + 1;
    L.evaluate_terms(x, e, true);
    const auto [f, c] = L.values(x, e);
    const double merit = f + lambda.dot(c) + 0.5 * rho * c.squaredNorm();
    const Vector3d mu = lambda + rho * c;
    J.setZero();
    auto fill = [&](Index t) {
      const TermEval& k = e[static_cast<std::size_t>(t)];
      const double q = x[t];
      g[t] = k.f + mu[0] + mu[1] * k.c1 + mu[2] * k.c2;
      hqb[t] = k.fd + mu[1] * k.c1d + mu[2] * k.c2d;
      g[T + t] = q * hqb[t];
      hbb[t] = q * (k.fdd + mu[1] * k.c1dd + mu[2] * k.c2dd);
      J(0, t) = 1.0;
      J(1, t) = k.c1;
      J(2, t) = k.c2;
      J(1, T + t) = q * k.c1d;
      J(2, T + t) = q * k.c2d;
    };
    // Projected gradient, split into the support and the members at q = 0.
    // The members outside the support are only scanned when the support is
    // close enough to stationary for one of them to be allowed in.
    double pg_support = 0.0;
    for (Index t = 0; t < T; ++t) {
      if (x[t] > 0.0) {
        fill(t);
        pg_support = std::max(pg_support, std::abs(clamp01(x[t] - g[t]) - x[t]));
        pg_support = std::max(pg_support, std::abs(clamp01(x[T + t] - g[T + t]) - x[T + t]));
      } else {
        g[t] = 0.0;
        g[T + t] = 0.0;
        hqb[t] = 0.0;
        hbb[t] = 0.0;
      }
    }
    double pg_outside = 0.0;
    Index entering = -1;
    if (pg_support <= std::max(omega, 0.1 * last_pg_outside)) {
      L.evaluate_terms(x, e);
      for (Index t = 0; t < T; ++t) {
        if (x[t] > 0.0) continue;
        fill(t);
        if (g[t] < 0.0) {
          pg_outside = std::max(pg_outside, std::min(-g[t], 1.0));
          if (entering < 0 || g[t] < g[entering]) entering = t;
        }
      }
      last_pg_outside = pg_outside;
    }
    const double pg = std::max(pg_support, pg_outside);
    stats.projected_gradient = pg;
    if (pg <= omega) break;
    // A member at q = 0 enters only once the current support is nearly
    // stationary, and then one at a time, steepest first.
    if (pg_support > std::max(omega, 0.1 * pg_outside)) entering = -1;

    std::vector<Index> free;
    std::vector<Index> pos(static_cast<std::size_t>(n), -1);
    for (Index t = 0; t < T; ++t) {
      const bool q_fixed = (x[t] <= 0.0 && t != entering) || (x[t] >= 1.0 && g[t] < 0.0);
      if (!q_fixed) free.push_back(t);
    }
    for (Index t = 0; t < T; ++t) {
      const double b = x[T + t];
      const double gb = g[T + t];
      const bool b_fixed = x[t] <= 0.0 || (b <= 0.0 && gb > 0.0) || (b >= 1.0 && gb < 0.0);
      if (!b_fixed) free.push_back(T + t);
    }
    if (free.empty()) break;
    const auto nf = static_cast<Index>(free.size());
    for (Index i = 0; i < nf; ++i) pos[static_cast<std::size_t>(free[static_cast<std::size_t>(i)])] = i;
    VectorXd gf(nf);
    MatrixXd Jf(3, nf);
    for (Index i = 0; i < nf; ++i) {
      gf[i] = g[free[static_cast<std::size_t>(i)]];
      Jf.col(i) = J.col(free[static_cast<std::size_t>(i)]);
    }
    double diag_scale = 1.0;
    for (Index t = 0; t < T; ++t) diag_scale = std::max({diag_scale, std::abs(hqb[t]), std::abs(hbb[t])});
    diag_scale = std::max(diag_scale, rho * (Jf.cwiseAbs2().colwise().sum().maxCoeff()));

    bool accepted = false;
    for (int attempt = 0; attempt < 60 && !accepted; ++attempt) {
      const double damp = tau * diag_scale;
      VectorXd d(nf);
      bool ok = true;
      if (nf <= kDenseLimit) {
        MatrixXd H = rho * Jf.transpose() * Jf;
        for (Index t = 0; t < T; ++t) {
          const Index iq = pos[static_cast<std::size_t>(t)];
          const Index ib = pos[static_cast<std::size_t>(T + t)];
          if (ib >= 0) H(ib, ib) += hbb[t];
          if (iq >= 0 && ib >= 0) {
            H(iq, ib) += hqb[t];
            H(ib, iq) += hqb[t];
          }
        }
        // Negative curvature is flipped rather than damped away, so the
        // step can follow the bilinear q-b saddle directions.
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(H);
        if (es.info() != Eigen::Success) {
          ok = false;
        } else {
          const double floor = 1e-14 * std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 1.0);
          const VectorXd ev = (es.eigenvalues().cwiseAbs().array().max(floor) + damp).matrix();
          d = -(es.eigenvectors() * (es.eigenvectors().transpose() * gf).cwiseQuotient(ev));
        }
      } else {
        // Block approximation A (positive definite) and Woodbury for rho J^T J.
        // Ainv applied blockwise.
        std::vector<Matrix2d> inv_blocks(static_cast<std::size_t>(T));
        std::vector<double> inv_single(static_cast<std::size_t>(nf), 0.0);
        auto apply_Ainv = [&](const VectorXd& v) {
          VectorXd out = VectorXd::Zero(nf);
          for (Index t = 0; t < T; ++t) {
            const Index iq = pos[static_cast<std::size_t>(t)];
            const Index ib = pos[static_cast<std::size_t>(T + t)];
            if (iq >= 0 && ib >= 0) {
              const Eigen::Vector2d r = inv_blocks[static_cast<std::size_t>(t)] * Eigen::Vector2d(v[iq], v[ib]);
              out[iq] = r[0];
              out[ib] = r[1];
            } else if (iq >= 0) {
              out[iq] = inv_single[static_cast<std::size_t>(iq)] * v[iq];
            } else if (ib >= 0) {
              out[ib] = inv_single[static_cast<std::size_t>(ib)] * v[ib];
            }
          }
          return out;
        };
        for (Index t = 0; t < T; ++t) {
          const Index iq = pos[static_cast<std::size_t>(t)];
          const Index ib = pos[static_cast<std::size_t>(T + t)];
          if (iq >= 0 && ib >= 0) {
            Matrix2d B;
            B << 0.0, hqb[t], hqb[t], hbb[t];
            Eigen::SelfAdjointEigenSolver<Matrix2d> es(B);
            const Eigen::Vector2d ev = es.eigenvalues().cwiseAbs().array() + damp;
            inv_blocks[static_cast<std::size_t>(t)] =
                es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
          } else if (iq >= 0) {
            inv_single[static_cast<std::size_t>(iq)] = 1.0 / damp;
          } else if (ib >= 0) {
            inv_single[static_cast<std::size_t>(ib)] = 1.0 / (std::abs(hbb[t]) + damp);
          }
        }
        const VectorXd Ag = apply_Ainv(gf);
        MatrixXd AJt(nf, 3);
        for (int r = 0; r < 3; ++r) AJt.col(r) = apply_Ainv(Jf.row(r).transpose());
        Eigen::Matrix3d S = Jf * AJt;
        S.diagonal().array() += 1.0 / rho;
        const Vector3d y = S.ldlt().solve(Jf * Ag);
        d = -(Ag - AJt * y);
      }
      if (ok && d.allFinite()) {
        VectorXd trial = x;
        for (Index i = 0; i < nf; ++i) {
          const Index j = free[static_cast<std::size_t>(i)];
          trial[j] = clamp01(x[j] + d[i]);
        }
        const double decrease = -(g.dot(trial - x));
        const double mt = L.merit(trial, lambda, rho, scratch);
        if (std::isfinite(mt) && mt < merit && merit - mt >= 1e-4 * std::max(decrease, 0.0)) {
          x = trial;
          accepted = true;
          stagnant = merit - mt <= 1e-15 * (std::abs(merit) + 1.0) ? stagnant + 1 : 0;
          tau = std::max(tau / 4.0, 1e-14);
          break;
        }
      }
      tau = std::max(tau * 8.0, 1e-12);
      if (tau > 1e30) break;
    }
    if (!accepted || stagnant >= 5) break;
  }
  return stats;
}

// Newton on the KKT system restricted to the support, with the bound-active
// excitation weights held fixed.
void polish(const Lagrangian& L, VectorXd& x, Vector3d& lambda) {
  const Index T = L.terms();
  for (Index t = 0; t < T; ++t) {
    if (x[t] < 1e-13) x[t] = 0.0;
    if (x[T + t] < 1e-15) x[T + t] = 0.0;
    if (x[T + t] > 1.0 - 1e-15) x[T + t] = 1.0;
  }
  std::vector<Index> free;
  for (Index t = 0; t < T; ++t) {
    if (x[t] > 0.0) free.push_back(t);
  }
  for (Index t = 0; t < T; ++t) {
    if (x[t] > 0.0 && x[T + t] > 0.0 && x[T + t] < 1.0) free.push_back(T + t);
  }
  const auto nf = static_cast<Index>(free.size());
  std::vector<TermEval> e;
  for (int it = 0; it < 30; ++it) {
    L.evaluate_terms(x, e);
    const auto [f, c] = L.values(x, e);
    VectorXd g(2 * T);
    MatrixXd J = MatrixXd::Zero(3, 2 * T);
    VectorXd hqb(T), hbb(T);
    for (Index t = 0; t < T; ++t) {
      const TermEval& k = e[static_cast<std::size_t>(t)];
      const double q = x[t];
      g[t] = k.f + lambda[0] + lambda[1] * k.c1 + lambda[2] * k.c2;
      hqb[t] = k.fd + lambda[1] * k.c1d + lambda[2] * k.c2d;
      g[T + t] = q * hqb[t];
      hbb[t] = q * (k.fdd + lambda[1] * k.c1dd + lambda[2] * k.c2dd);
      J(0, t) = 1.0;
      J(1, t) = k.c1;
      J(2, t) = k.c2;
      J(1, T + t) = q * k.c1d;
      J(2, T + t) = q * k.c2d;
    }
    MatrixXd K = MatrixXd::Zero(nf + 3, nf + 3);
    VectorXd rhs(nf + 3);
    std::vector<Index> pos(static_cast<std::size_t>(2 * T), -1);
    for (Index i = 0; i < nf; ++i) pos[static_cast<std::size_t>(free[static_cast<std::size_t>(i)])] = i;
    for (Index i = 0; i < nf; ++i) {
      const Index j = free[static_cast<std::size_t>(i)];
      rhs[i] = -g[j];
      K.block(nf, i, 3, 1) = J.col(j);
      K.block(i, nf, 1, 3) = J.col(j).transpose();
    }
    for (Index t = 0; t < T; ++t) {
      const Index iq = pos[static_cast<std::size_t>(t)];
      const Index ib = pos[static_cast<std::size_t>(T + t)];
      if (ib >= 0) K(ib, ib) += hbb[t];
      if (iq >= 0 && ib >= 0) {
        K(iq, ib) += hqb[t];
        K(ib, iq) += hqb[t];
      }
    }
    rhs.tail(3) = -c;
    const double residual = rhs.cwiseAbs().maxCoeff();
    if (residual < 1e-15) break;
    const VectorXd step = K.completeOrthogonalDecomposition().solve(rhs);
    if (!step.allFinite()) break;
    VectorXd trial = x;
    for (Index i = 0; i < nf; ++i) trial[free[static_cast<std::size_t>(i)]] += step[i];
    if ((trial.array() < 0.0).any() || (trial.tail(T).array() > 1.0).any()) break;
    const Vector3d c_trial = L.constraints(trial);
    if (c_trial.cwiseAbs().maxCoeff() > std::max(c.cwiseAbs().maxCoeff(), 1e-14)) break;
    x = trial;
    lambda += step.tail(3);
  }
}

struct LocalOutcome {
  VectorXd x;
  StartRecord record;
};

LocalOutcome solve_local(const Lagrangian& L, VectorXd x, const SolverOptions& opt) {
  Vector3d lambda = Vector3d::Zero();
  double rho = 10.0;
  double eta = 0.1;
  double omega = 1e-3;
  const double omega_final = 1e-12;
  int iterations = 0;
  double prev_obj = std::numeric_limits<double>::infinity();
  for (int outer = 0; outer < opt.max_outer; ++outer) {
    const InnerStats st = minimize_inner(L, x, lambda, rho, omega, opt.max_inner);
    iterations += st.iterations;
    const Vector3d c = L.constraints(x);
    const double cn = c.cwiseAbs().maxCoeff();
    const double obj = L.R_of(x);
    const bool stalled = std::abs(obj - prev_obj) <= opt.objective_rtol * std::abs(obj);
    prev_obj = obj;
    if (cn <= opt.constraint_tol && (omega <= omega_final || stalled)) break;
    if (cn <= eta) {
      lambda += rho * c;
      eta = std::max(eta * 0.1, 0.1 * opt.constraint_tol);
      omega = std::max(omega * 0.1, omega_final);
    } else {
      rho = std::min(rho * 10.0, 1e16);
    }
  }
  const VectorXd before = x;
  const double R_before = L.R_of(x);
  const double c_before = L.constraints(x).cwiseAbs().maxCoeff();
  polish(L, x, lambda);
  const double R_after = L.R_of(x);
  const double c_after = L.constraints(x).cwiseAbs().maxCoeff();
  const bool keep = c_after <= std::max(c_before, opt.constraint_tol) &&
                    (R_after >= R_before - 1e-9 * std::abs(R_before) || c_before > opt.constraint_tol);
  if (!keep) x = before;
  LocalOutcome out;
  out.x = x;
  out.record.R = L.R_of(x);
  out.record.constraint_residual = L.constraints(x).cwiseAbs().maxCoeff();
  out.record.converged = out.record.constraint_residual <= opt.constraint_tol;
  out.record.iterations = iterations;
  return out;
}

VectorXd pack(const MixedBlockState& s) {
  VectorXd x(s.q.size() * 2);
  x << s.q, s.beta_sq;
  return x;
}

MixedBlockState unpack(const VectorXd& x) {
  const Index T = x.size() / 2;
  return {x.head(T), x.tail(T)};
}

std::vector<std::string> describe_active(const BlockFamily& family, const MixedBlockState& s) {
  std::vector<std::string> out{"sum q = 1", "P1", "P2"};
  int zero = 0;
  for (std::size_t t = 0; t < family.size(); ++t) {
    const auto i = static_cast<Index>(t);
    if (s.q[i] <= 0.0) {
      ++zero;
      continue;
    }
    if (s.beta_sq[i] >= 1.0) out.push_back("beta^2 = 1 for " + family.describe(t));
    if (s.beta_sq[i] <= 0.0) out.push_back("beta^2 = 0 for " + family.describe(t));
  }
  if (zero > 0) {
    std::ostringstream os;
    os << "q = 0 for " << zero << " of " << family.size() << " members";
    out.push_back(os.str());
  }
  return out;
}

}  // namespace

StartRecord solve_from(const BoundProblem& prob, MixedBlockState& state, const SolverOptions& options) {
  validate(prob);
  if (prob.P2 == 0.0) throw DomainError("solve_from: P2 = 0 has a closed-form optimum");
  const Lagrangian L(prob);
  if (state.q.size() != L.terms() || state.beta_sq.size() != L.terms()) {
    throw DomainError("solve_from: state size does not match the family");
  }
  VectorXd x = pack(state).unaryExpr([](double v) { return clamp01(v); });
  LocalOutcome r = solve_local(L, x, options);
  state = unpack(r.x);
  return r.record;
}

MaxRResult max_R(const BoundProblem& prob, const SolverOptions& options) {
  validate(prob);
  if (prob.P2 == 0.0 || prob.M == prob.N) return max_R_reduced(prob);
  const double cap = max_feasible_P2(prob.N, prob.M, prob.P1);
  if (prob.P2 > cap * (1.0 + 1e-6)) {
    std::ostringstream os;
    os << "max_R: P2 = " << prob.P2 << " is not reachable at depth M = " << prob.M << " with P1 = " << prob.P1
       << " (largest reachable P2 is about " << cap << ")";
    throw InfeasibleError(os.str());
  }
  const Lagrangian L(prob);
  const Index T = L.terms();
  MaxRResult out;
  out.R = -std::numeric_limits<double>::infinity();
  VectorXd best_x;
  auto consider = [&](const LocalOutcome& r, int index, bool structured) {
    StartRecord rec = r.record;
    rec.index = index;
    rec.structured = structured;
    out.starts.push_back(rec);
    if (!rec.converged) return;
    ++out.converged_starts;
    if (rec.R > out.R) {
      out.R = rec.R;
      best_x = r.x;
      out.constraint_residual = rec.constraint_residual;
    }
  };

  // Start points are drawn sequentially from one generator, solved in
  // parallel, and reduced in start order, so the result does not depend on
  // scheduling.
  std::vector<VectorXd> starts;
  std::vector<bool> structured;
  if (options.structured_start) {
    try {
      starts.push_back(pack(max_R_reduced(prob).state));
      structured.push_back(true);
    } catch (const InfeasibleError&) {
      // Random starts only.
    }
  }
  std::mt19937_64 rng(options.seed);
  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int s = 0; s < options.random_starts; ++s) {
    // An optimum needs at most three members (one per equality constraint),
    // so starts draw a random support of two to four members; members left
    // at q = 0 can still enter through the active-set logic.
    VectorXd x = VectorXd::Zero(2 * T);
    const auto support = std::min<Index>(T, 2 + static_cast<Index>(rng() % 3));
    for (Index m = 0; m < support; ++m) {
      Index t = static_cast<Index>(rng() % static_cast<std::uint64_t>(T));
      while (x[t] > 0.0) t = (t + 1) % T;
      x[t] = expo(rng);
    }
    x.head(T) /= x.head(T).sum();
    for (Index t = 0; t < T; ++t) x[T + t] = unif(rng);
    starts.push_back(std::move(x));
    structured.push_back(false);
  }
  std::vector<LocalOutcome> outcomes(starts.size());
  {
    std::atomic<std::size_t> next{0};
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const auto workers = static_cast<unsigned>(std::min<std::size_t>(hw, starts.size()));
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < starts.size(); i = next++) outcomes[i] = solve_local(L, starts[i], options);
      });
    }
  }
  for (std::size_t i = 0; i < outcomes.size(); ++i) consider(outcomes[i], static_cast<int>(i), structured[i]);
  if (best_x.size() == 0) {
    std::ostringstream os;
    os << "max_R: no start met the constraints at M = " << prob.M;
    throw InfeasibleError(os.str());
  }
  out.state = unpack(best_x);
  out.active_constraints = describe_active(L.family(), out.state);
  return out;
}

}  // namespace afc
