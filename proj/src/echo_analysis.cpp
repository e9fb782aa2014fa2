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

#include "afc/echo_analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>
#include <unsupported/Eigen/LevenbergMarquardt>

#include "afc/errors.hpp"
#include "afc/io.hpp"
#include "afc/numeric.hpp"

namespace afc {
namespace {

constexpr double kSqrtHalfPi = 1.2533141373155003;  // sqrt(pi / 2)
constexpr double kFwhmPerSigma = 2.3548200450309493;  // 2 sqrt(2 ln 2)

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Gaussian integrated over bins of unit width, in bin units. Parameters are
// (E, t0, fwhm, offset); E is the continuum peak height.
struct BinnedGaussian : Eigen::DenseFunctor<double> {
  BinnedGaussian(std::vector<double> t, std::vector<double> y)
      : Eigen::DenseFunctor<double>(4, static_cast<int>(t.size())), t_(std::move(t)), y_(std::move(y)) {
    w_.resize(y_.size());
    for (std::size_t i = 0; i < y_.size(); ++i) w_[i] = 1.0 / std::sqrt(std::max(y_[i], 1.0));
  }

  struct Terms {
    double integral;  // int over the bin of exp(-(t - t0)^2 / 2 s^2)
    double d_t0;
    double d_s;
  };

  static Terms terms(double t, double t0, double s) {
    const double a = (t - 0.5 - t0) / s;
    const double b = (t + 0.5 - t0) / s;
    const double ea = std::exp(-0.5 * a * a);
    const double eb = std::exp(-0.5 * b * b);
    const double ia = kSqrtHalfPi * std::erf(a / std::numbers::sqrt2);
    const double ib = kSqrtHalfPi * std::erf(b / std::numbers::sqrt2);
    Terms out{};
    out.integral = s * (ib - ia);
    out.d_t0 = ea - eb;
    // d/ds of s * int_a^b exp(-u^2/2) du, with a and b scaling as 1/s.
    out.d_s = (ib - ia) - b * eb + a * ea;
    return out;
  }

  double model(const Eigen::VectorXd& p, double t) const {
    const double s = std::abs(p[2]) / kFwhmPerSigma;
    return p[3] + p[0] * terms(t, p[1], s).integral;
  }

  int operator()(const InputType& p, ValueType& r) const {
    for (std::size_t i = 0; i < t_.size(); ++i) r[static_cast<Eigen::Index>(i)] = (model(p, t_[i]) - y_[i]) * w_[i];
    return 0;
  }

  int df(const InputType& p, JacobianType& J) const {
    const double sign = p[2] < 0.0 ? -1.0 : 1.0;
    const double s = std::abs(p[2]) / kFwhmPerSigma;
    for (std::size_t i = 0; i < t_.size(); ++i) {
      const Terms k = terms(t_[i], p[1], s);
      const auto r = static_cast<Eigen::Index>(i);
      J(r, 0) = k.integral * w_[i];
      J(r, 1) = p[0] * k.d_t0 * w_[i];
      J(r, 2) = p[0] * k.d_s * sign / kFwhmPerSigma * w_[i];
      J(r, 3) = w_[i];
    }
    return 0;
  }

  std::vector<double> t_;
  std::vector<double> y_;
  std::vector<double> w_;
};

}  // namespace

void validate(const TimeHistogram& h) {
  if (!(h.bin_width > 0.0)) throw DomainError("histogram: bin_width must be positive");
  if (h.counts.empty()) throw DomainError("histogram: no bins");
  if (h.herald_index < 0 || h.herald_index >= static_cast<int>(h.counts.size())) {
    throw DomainError("histogram: herald_index out of range");
  }
  if (!(h.storage_time / h.bin_width >= 10.0)) throw DomainError("histogram: storage time must span >= 10 bins");
  if (std::any_of(h.counts.begin(), h.counts.end(), [](std::int64_t c) { return c < 0; })) {
    throw DomainError("histogram: negative counts");
  }
}

BackgroundEstimate estimate_background(const TimeHistogram& h) {
  validate(h);
  if (h.herald_index < kMinBackgroundBins) {
    throw DomainError("estimate_background: need at least " + std::to_string(kMinBackgroundBins) +
                      " bins before the herald");
  }
  CompensatedSum<> sum;
  for (int i = 0; i < h.herald_index; ++i) sum += static_cast<double>(h.counts[static_cast<std::size_t>(i)]);
  BackgroundEstimate out;
  out.bins = h.herald_index;
  out.rate = sum.value() / out.bins;
  out.sigma = std::sqrt(sum.value()) / out.bins;
  return out;
}

TimeWindow default_fit_window(const TimeHistogram& h) {
  const double half = std::max(0.25 * h.storage_time, 20.0 * h.bin_width);
  return {h.storage_time - half, h.storage_time + half};
}

EchoFit fit_echo(const TimeHistogram& h) { return fit_echo(h, default_fit_window(h)); }

EchoFit fit_echo(const TimeHistogram& h, const TimeWindow& window) {
  validate(h);
  if (!(window.end > window.begin)) throw DomainError("fit_echo: empty window");
  if (h.storage_time < window.begin || h.storage_time > window.end) {
    throw DomainError("fit_echo: window does not contain the expected echo time");
  }
  const BackgroundEstimate bg = estimate_background(h);

  // Bins inside the window, times in bin units relative to the herald.
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    const double t = h.time(i);
    if (t >= window.begin && t <= window.end) idx.push_back(i);
  }
  if (idx.size() < 8) throw DomainError("fit_echo: fewer than 8 bins in the window");
  std::vector<double> t(idx.size());
  std::vector<double> y(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    t[k] = static_cast<double>(idx[k]) - h.herald_index;
    y[k] = static_cast<double>(h.counts[idx[k]]);
  }

  // Seed: significant local maxima of a 3-bin running mean; the one closest
  // to the expected echo time wins.
  std::vector<double> smooth(y.size());
  for (std::size_t k = 0; k < y.size(); ++k) {
    const std::size_t lo = k == 0 ? 0 : k - 1;
    const std::size_t hi = std::min(k + 1, y.size() - 1);
    double s = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) s += y[j];
    smooth[k] = s / static_cast<double>(hi - lo + 1);
  }
  std::vector<double> sorted = y;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
  const double offset0 = sorted[sorted.size() / 2];
  const double smax = *std::max_element(smooth.begin(), smooth.end());
  const double threshold = offset0 + 0.5 * (smax - offset0);
  const double expected = h.storage_time / h.bin_width;
  std::size_t seed = 0;
  bool found = false;
  for (std::size_t k = 0; k < smooth.size(); ++k) {
    const bool left = k == 0 || smooth[k] >= smooth[k - 1];
    const bool right = k + 1 == smooth.size() || smooth[k] >= smooth[k + 1];
    if (!left || !right || smooth[k] < threshold) continue;
    if (!found || std::abs(t[k] - expected) < std::abs(t[seed] - expected)) {
      seed = k;
      found = true;
    }
  }
  const double E0 = y[seed] - offset0;
  if (!found || !(E0 > 0.0)) throw LowSignalError("fit_echo: no echo peak above the offset");
  std::size_t lo = seed;
  std::size_t hi = seed;
  while (lo > 0 && y[lo - 1] - offset0 > 0.5 * E0) --lo;
  while (hi + 1 < y.size() && y[hi + 1] - offset0 > 0.5 * E0) ++hi;
  const double w0 = std::max(2.0, static_cast<double>(hi - lo + 1));

  BinnedGaussian functor(t, y);
  Eigen::VectorXd p(4);
  p << E0, t[seed], w0, offset0;
  Eigen::LevenbergMarquardt<BinnedGaussian> lm(functor);
  lm.setMaxfev(4000);
  lm.setXtol(1e-12);
  lm.setFtol(1e-12);
  const auto status = lm.minimize(p);
  if (status == Eigen::LevenbergMarquardtSpace::ImproperInputParameters ||
      status == Eigen::LevenbergMarquardtSpace::TooManyFunctionEvaluation || !p.allFinite()) {
    throw LowSignalError("fit_echo: Gaussian fit did not converge");
  }
  p[2] = std::abs(p[2]);

  Eigen::MatrixXd J(static_cast<Eigen::Index>(t.size()), 4);
  functor.df(p, J);
  const Eigen::Matrix4d info = J.transpose() * J;
  Eigen::FullPivLU<Eigen::Matrix4d> lu(info);
  if (!lu.isInvertible()) throw LowSignalError("fit_echo: singular fit information matrix");
  Eigen::Matrix4d cov_bins = lu.inverse();
  Eigen::VectorXd r(static_cast<Eigen::Index>(t.size()));
  functor(p, r);

  EchoFit fit;
  const Eigen::Vector4d scale(1.0, h.bin_width, h.bin_width, 1.0);
  fit.covariance = scale.asDiagonal() * cov_bins * scale.asDiagonal();
  fit.E = p[0];
  fit.t0 = p[1] * h.bin_width;
  fit.fwhm = p[2] * h.bin_width;
  fit.offset = p[3];
  fit.chi2_per_dof = r.squaredNorm() / std::max<double>(1.0, static_cast<double>(t.size()) - 4.0);
  fit.iterations = static_cast<int>(lm.iterations());
  fit.background_rate = bg.rate;
  fit.background_sigma = bg.sigma;
  if (!(fit.E > 0.0) || !(fit.fwhm > 0.0) || fit.E < 3.0 * fit.sigma_E()) {
    std::ostringstream os;
    os << "fit_echo: echo amplitude " << fit.E << " is below three standard errors (" << fit.sigma_E() << ")";
    throw LowSignalError(os.str());
  }

  CompensatedSum<> a_sum;
  int a_bins = 0;
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    const double ti = h.time(i);
    if (ti >= fit.t0 - 0.5 * h.storage_time && ti < fit.t0 + 0.5 * h.storage_time) {
      a_sum += static_cast<double>(h.counts[i]);
      ++a_bins;
    }
  }
  if (a_bins == 0) throw DomainError("fit_echo: averaging window lies outside the histogram");
  fit.A_bins = a_bins;
  fit.A = a_sum.value() / a_bins;
  fit.A_sigma = std::sqrt(a_sum.value()) / a_bins;
  if (!(fit.A > 0.0)) throw LowSignalError("fit_echo: no counts in the averaging window");
  return fit;
}

double deconvolution_factor(double echo_fwhm, double detector_fwhm) {
  if (!(detector_fwhm >= 0.0)) throw DomainError("deconvolution: detector FWHM must be non-negative");
  if (!(echo_fwhm > detector_fwhm)) {
    throw DomainError("deconvolution: echo FWHM must exceed the detector FWHM");
  }
  return echo_fwhm / std::sqrt(echo_fwhm * echo_fwhm - detector_fwhm * detector_fwhm);
}

Contrast echo_contrast(const EchoFit& fit, const Corrections& corrections) {
  if (!(fit.E > 0.0) || !(fit.A > 0.0) || !(fit.fwhm > 0.0)) throw DomainError("echo_contrast: invalid fit");
  double E = fit.E;
  // Gradient of ln R with respect to (E, fwhm).
  Eigen::Vector2d g(1.0 / fit.E, 0.0);
  if (corrections.deconvolve) {
    const double D = corrections.detector_fwhm;
    E *= deconvolution_factor(fit.fwhm, D);
    g[1] = -D * D / (fit.fwhm * (fit.fwhm * fit.fwhm - D * D));
  }
  double A = fit.A;
  double var_A = fit.A_sigma * fit.A_sigma;
  if (corrections.subtract_background) {
    A -= fit.background_rate;
    var_A += fit.background_sigma * fit.background_sigma;
    if (!(A > 0.0)) throw DomainError("echo_contrast: window average does not exceed the background");
  }
  Eigen::Matrix2d cov;
  cov << fit.covariance(0, 0), fit.covariance(0, 2), fit.covariance(2, 0), fit.covariance(2, 2);
  const double var_ln = g.dot(cov * g) + var_A / (A * A);
  Contrast out;
  out.R = E / A;
  out.sigma_R = out.R * std::sqrt(var_ln);
  return out;
}

std::vector<SweepRow> contrast_vs_param_sweep(std::span<const TimeHistogram> histograms,
                                              std::span<const std::string> labels) {
  if (labels.size() != histograms.size()) throw DomainError("sweep: one label per histogram required");
  std::vector<SweepRow> rows(histograms.size());
  auto work = [&](std::size_t i) {
    SweepRow& row = rows[i];
    row.label = labels[i];
    try {
      row.fit = fit_echo(histograms[i]);
      const double D = histograms[i].detector_fwhm;
      row.raw = echo_contrast(row.fit, {false, false, D});
      row.subtracted = echo_contrast(row.fit, {true, false, D});
      row.deconvolved = echo_contrast(row.fit, {true, true, D});
      row.ok = true;
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
    }
  };
  std::atomic<std::size_t> next{0};
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const auto workers = static_cast<unsigned>(std::min<std::size_t>(hw, histograms.size()));
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < histograms.size(); i = next++) work(i);
      });
    }
  }
  return rows;
}

TimeHistogram load_histogram(const std::string& csv_path, const std::string& sidecar_path) {
  TimeHistogram h;
  try {
    const auto meta = nlohmann::json::parse(read_text_file(sidecar_path));
    h.bin_width = meta.at("bin_width").get<double>();
    h.herald_index = meta.at("herald_index").get<int>();
    h.storage_time = meta.at("storage_time").get<double>();
    h.detector_fwhm = meta.value("detector_fwhm", kDefaultDetectorFwhm);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(sidecar_path + ": " + e.what());
  }
  const CsvTable table = load_numeric_csv(csv_path);
  const std::size_t col = table.header.empty() ? 1 : table.column("counts");
  for (const auto& row : table.rows) {
    if (row.size() <= col) throw ConfigError(csv_path + ": missing counts column");
    const double c = row[col];
    if (c < 0.0 || c != std::floor(c)) throw ConfigError(csv_path + ": counts must be non-negative integers");
    h.counts.push_back(static_cast<std::int64_t>(c));
  }
  validate(h);
  return h;
}

std::string histogram_csv(const TimeHistogram& h) {
  std::ostringstream os;
  os << "bin_start_s,counts\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    os << format_double(static_cast<double>(i) * h.bin_width) << ',' << h.counts[i] << '\n';
  }
  return os.str();
}

std::string histogram_sidecar(const TimeHistogram& h) {
  nlohmann::ordered_json j;
  j["bin_width"] = h.bin_width;
  j["herald_index"] = h.herald_index;
  j["storage_time"] = h.storage_time;
  j["detector_fwhm"] = h.detector_fwhm;
  return j.dump(2) + "\n";
}

double SyntheticEcho::observed_fwhm() const {
  return std::sqrt(echo_fwhm * echo_fwhm + detector_fwhm * detector_fwhm);
}

double SyntheticEcho::observed_peak() const {
  const double sigma = observed_fwhm() / kFwhmPerSigma;
  return echo_area * bin_width / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

std::vector<double> expected_counts(const SyntheticEcho& spec) {
  if (!(spec.bin_width > 0.0) || spec.bins < 1 || !(spec.observed_fwhm() > 0.0)) {
    throw DomainError("synthetic echo: invalid parameters");
  }
  const double sigma = spec.observed_fwhm() / kFwhmPerSigma;
  std::vector<double> out(static_cast<std::size_t>(spec.bins));
  for (int i = 0; i < spec.bins; ++i) {
    const double t = (i - spec.herald_index) * spec.bin_width;
    const double lo = (t - 0.5 * spec.bin_width - spec.storage_time) / sigma;
    const double hi = (t + 0.5 * spec.bin_width - spec.storage_time) / sigma;
    out[static_cast<std::size_t>(i)] = spec.background + spec.echo_area * (normal_cdf(hi) - normal_cdf(lo));
  }
  return out;
}

namespace {

TimeHistogram shell(const SyntheticEcho& spec) {
  TimeHistogram h;
  h.bin_width = spec.bin_width;
  h.herald_index = spec.herald_index;
  h.storage_time = spec.storage_time;
  h.detector_fwhm = spec.detector_fwhm;
  return h;
}

}  // namespace

TimeHistogram sample_histogram(const SyntheticEcho& spec, std::uint64_t seed) {
  TimeHistogram h = shell(spec);
  std::mt19937_64 rng(seed);
  for (const double mean : expected_counts(spec)) {
    std::poisson_distribution<std::int64_t> pois(mean);
    h.counts.push_back(mean > 0.0 ? pois(rng) : 0);
  }
  return h;
}

TimeHistogram rounded_histogram(const SyntheticEcho& spec, double scale) {
  TimeHistogram h = shell(spec);
  // Error diffusion: the rounding residual carries into the next bin, so
  // every run of bins keeps its expected total to within one count.
  double carry = 0.0;
  for (const double mean : expected_counts(spec)) {
    const double target = mean * scale + carry;
    const auto c = static_cast<std::int64_t>(std::max(0.0, std::round(target)));
    carry = target - static_cast<double>(c);
    h.counts.push_back(c);
  }
  return h;
}

}  // namespace afc
