#include "memchan/mutual_info.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "memchan/errors.hpp"

namespace memchan {

namespace {

constexpr std::size_t kBatches = 100;

double half_log2_ratio(double num_log1p_arg, double den_log1p_arg) {
  return (std::log1p(num_log1p_arg) - std::log1p(den_log1p_arg)) / (2.0 * std::numbers::ln2);
}

void require_row_index(std::size_t k, std::size_t n) {
  if (k < 1 || k > n) {
    std::ostringstream msg;
    msg << "row index " << k << " outside 1.." << n;
    throw DimensionError(msg.str());
  }
}

// Running second moments of (gamma, alpha_k, interference).
struct Moments {
  double count = 0.0;
  double sg = 0.0, sa = 0.0, ss = 0.0;
  double sgg = 0.0, saa = 0.0, sss = 0.0;
  double sga = 0.0, sgs = 0.0;

  void add(double g, double a, double s) {
    count += 1.0;
    sg += g;
    sa += a;
    ss += s;
    sgg += g * g;
    saa += a * a;
    sss += s * s;
    sga += g * a;
    sgs += g * s;
  }

  void merge(const Moments& o) {
    count += o.count;
    sg += o.sg;
    sa += o.sa;
    ss += o.ss;
    sgg += o.sgg;
    saa += o.saa;
    sss += o.sss;
    sga += o.sga;
    sgs += o.sgs;
  }

  double cov(double sxy, double sx, double sy) const { return (sxy - sx * sy / count) / (count - 1.0); }
};

// Plug-in MI of a bivariate Gaussian, -1/2 log2(1 - rho^2).
double gaussian_mi(double var_x, double var_y, double cov_xy) {
  if (!(var_x > 0.0) || !(var_y > 0.0))
    throw NumericError("mc_mi_estimate: degenerate sample covariance (zero variance)");
  const double rho2 = cov_xy * cov_xy / (var_x * var_y);
  if (!(rho2 < 1.0)) throw NumericError("mc_mi_estimate: degenerate sample covariance (|rho| >= 1)");
  return -0.5 * std::log1p(-rho2) / std::numbers::ln2;
}

struct PairEstimate {
  double i = 0.0;
  double i_prime = 0.0;
};

PairEstimate estimate(const Moments& m, bool has_interference) {
  const double vg = m.cov(m.sgg, m.sg, m.sg);
  const double va = m.cov(m.saa, m.sa, m.sa);
  PairEstimate e;
  e.i = gaussian_mi(vg, va, m.cov(m.sga, m.sg, m.sa));
  if (has_interference) e.i_prime = gaussian_mi(vg, m.cov(m.sss, m.ss, m.ss), m.cov(m.sgs, m.sg, m.ss));
  return e;
}

}  // namespace

void SourceParams::validate() const {
  if (!std::isfinite(mean_photons) || !(mean_photons > 0.0)) {
    std::ostringstream msg;
    msg << "mean photon number must be finite and > 0 (got " << mean_photons << ")";
    throw ParameterError(msg.str());
  }
}

double residual_mu(const Eigen::MatrixXd& f_tilde, std::size_t k) {
  require_row_index(k, static_cast<std::size_t>(f_tilde.rows()));
  const auto row = static_cast<Eigen::Index>(k - 1);
  double off = 0.0;
  for (Eigen::Index j = 0; j < f_tilde.cols(); ++j)
    if (j != row) off += f_tilde(row, j) * f_tilde(row, j);
  return std::sqrt(off);
}

MIPair mi_pair(double f_kk, double mu, const SourceParams& source) {
  source.validate();
  if (!std::isfinite(f_kk) || !std::isfinite(mu)) throw ParameterError("mi_pair: non-finite coefficient");
  if (mu < 0.0) throw ParameterError("mi_pair: mu must be non-negative");
  const double direct = f_kk * f_kk;
  const double cross = mu * mu;
  if (direct + cross > 1.0 + 1e-9) throw ParameterError("mi_pair: row norm exceeds 1");

  // M11 = 1 + N(f^2+mu^2), det of the (1,2) block = N (1 + N mu^2),
  // det of the (1,3) block = N (1 + N f^2).
  const double n = source.mean_photons;
  MIPair p;
  p.i_value = half_log2_ratio(n * (direct + cross), n * cross);
  p.i_prime_value = half_log2_ratio(n * (direct + cross), n * direct);
  return p;
}

std::size_t limit_chain_length(double epsilon, double eta) {
  constexpr std::size_t floor_n = 200;
  constexpr std::size_t cap_n = 2000;
  const double ratio = std::sqrt(epsilon * eta);
  if (!(ratio < 1.0)) return cap_n;
  const double wanted = std::ceil(40.0 / (1.0 - ratio));
  if (wanted >= static_cast<double>(cap_n)) return cap_n;
  return std::max(floor_n, static_cast<std::size_t>(wanted));
}

std::size_t limit_row(std::size_t n) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(n) / 2.0)));
}

MIProfile mi_profile(const EffectiveCoupling& eff, const SourceParams& source, std::size_t edge_width) {
  source.validate();
  const std::size_t n = eff.size();
  if (n == 0) throw DimensionError("mi_profile: empty coupling");

  MIProfile profile;
  profile.reports.reserve(n);
  for (std::size_t k = 1; k <= n; ++k) {
    MIReport r;
    r.k_index = k;
    r.mu = residual_mu(eff.f_tilde, k);
    const auto pair = mi_pair(eff.f_tilde(k - 1, k - 1), r.mu, source);
    r.i_value = pair.i_value;
    r.i_prime_value = pair.i_prime_value;
    r.transient = k <= edge_width || k + edge_width > n;
    profile.reports.push_back(r);
  }

  auto close = [](const MIReport& a, const MIReport& b) {
    return std::abs(a.i_value - b.i_value) < kConvergenceTolerance &&
           std::abs(a.i_prime_value - b.i_prime_value) < kConvergenceTolerance;
  };
  // Backward difference; the first row has no predecessor and looks forward.
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) {
      profile.reports[i].converged = close(profile.reports[i], profile.reports[i - 1]);
    } else if (n > 1) {
      profile.reports[i].converged = close(profile.reports[0], profile.reports[1]);
    }
  }

  profile.limit_index = limit_row(n);
  const MIReport& at_limit = profile.reports[profile.limit_index - 1];
  profile.limit_i = at_limit.i_value;
  profile.limit_i_prime = at_limit.i_prime_value;
  profile.converged = at_limit.converged && !at_limit.transient;
  if (profile.converged) {
    std::size_t first = profile.limit_index;
    while (first > 1 && profile.reports[first - 2].converged) --first;
    profile.converged_from = first;
  }
  for (auto& r : profile.reports) {
    r.limit_i = profile.limit_i;
    r.limit_i_prime = profile.limit_i_prime;
  }
  return profile;
}

MCEstimate mc_mi_estimate(const EffectiveCoupling& eff, const SourceParams& source, std::size_t k,
                          std::size_t samples, std::uint64_t seed) {
  source.validate();
  const std::size_t n = eff.size();
  require_row_index(k, n);
  if (samples < kMinMonteCarloSamples) {
    std::ostringstream msg;
    msg << "mc_mi_estimate needs at least " << kMinMonteCarloSamples << " samples";
    throw ParameterError(msg.str());
  }

  const auto row = static_cast<Eigen::Index>(k - 1);
  const double direct = eff.f_tilde(row, row);
  std::vector<double> others;
  for (Eigen::Index j = 0; j < eff.f_tilde.cols(); ++j)
    if (j != row && eff.f_tilde(row, j) != 0.0) others.push_back(eff.f_tilde(row, j));
  const bool has_interference = !others.empty();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> amplitude(0.0, std::sqrt(source.mean_photons / 2.0));
  std::normal_distribution<double> noise(0.0, std::sqrt(0.5));

  Moments total;
  std::vector<PairEstimate> batch_values;
  batch_values.reserve(kBatches);
  const std::size_t per_batch = samples / kBatches;
  for (std::size_t b = 0; b < kBatches; ++b) {
    const std::size_t count = (b + 1 == kBatches) ? samples - per_batch * (kBatches - 1) : per_batch;
    Moments m;
    for (std::size_t s = 0; s < count; ++s) {
      const double a = amplitude(rng);
      double interference = 0.0;
      for (double c : others) interference += c * amplitude(rng);
      const double gamma = direct * a + interference + noise(rng);
      m.add(gamma, a, interference);
    }
    batch_values.push_back(estimate(m, has_interference));
    total.merge(m);
  }

  const PairEstimate full = estimate(total, has_interference);
  auto batch_std_err = [&](auto member) {
    double mean = 0.0;
    for (const auto& v : batch_values) mean += v.*member;
    mean /= static_cast<double>(kBatches);
    double ss = 0.0;
    for (const auto& v : batch_values) ss += (v.*member - mean) * (v.*member - mean);
    return std::sqrt(ss / static_cast<double>(kBatches - 1) / static_cast<double>(kBatches));
  };

  MCEstimate e;
  e.i_est = full.i;
  e.i_prime_est = full.i_prime;
  e.std_err = batch_std_err(&PairEstimate::i);
  e.std_err_prime = batch_std_err(&PairEstimate::i_prime);
  e.samples = samples;
  return e;
}

}  // namespace memchan
