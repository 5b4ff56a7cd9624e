#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "memchan/channel_model.hpp"
#include "memchan/unravel.hpp"

namespace memchan {

/// Gaussian ensemble of coherent-state amplitudes, P(alpha) ~ exp(-|alpha|^2 / N).
struct SourceParams {
  double mean_photons = 1.0;

  /// Throws ParameterError unless N is finite and strictly positive.
  void validate() const;
};

/// Mutual informations in bits for one output: with its own input (I) and
/// with all the other inputs (I').
///
/// Both refer to a single real quadrature: at mu = 0 the value is
/// 0.5 * log2(1 + N f_kk^2). The complex (two-quadrature) value is twice this.
struct MIPair {
  double i_value = 0.0;
  double i_prime_value = 0.0;
};

struct MIReport {
  std::size_t k_index = 0;  // 1-based channel use
  double i_value = 0.0;
  double i_prime_value = 0.0;
  double mu = 0.0;
  bool converged = false;
  bool transient = false;
  double limit_i = 0.0;
  double limit_i_prime = 0.0;
};

struct MIProfile {
  std::vector<MIReport> reports;
  std::size_t limit_index = 0;     // 1-based row the limits were read from
  std::size_t converged_from = 0;  // first k from which every row up to limit_index is converged; 0 if none
  bool converged = false;
  double limit_i = 0.0;
  double limit_i_prime = 0.0;
};

/// Step tolerance declaring I_k, I'_k converged.
inline constexpr double kConvergenceTolerance = 1e-9;

/// Residual cross-talk of row k (1-based): sqrt(sum_{j != k} f~(k,j)^2).
/// Throws DimensionError if k is out of range.
[[nodiscard]] double residual_mu(const Eigen::MatrixXd& f_tilde, std::size_t k);

/// Closed-form I, I' from the diagonal coefficient and residual cross-talk.
///
/// With M = [[1+N(f^2+mu^2), N f, N mu], [N f, N, 0], [N mu, 0, N]]:
///   I  = 1/2 [log2 M11 + log2 M22 - log2 det M_{12 block}]
///   I' = 1/2 [log2 M11 + log2 M33 - log2 det M_{13 block}]
/// Throws ParameterError on non-finite input or f^2 + mu^2 > 1 + 1e-9.
[[nodiscard]] MIPair mi_pair(double f_kk, double mu, const SourceParams& source);

/// Chain length used to approximate the k -> infinity limits:
/// max(200, ceil(40 / (1 - sqrt(eps*eta)))), capped at 2000.
[[nodiscard]] std::size_t limit_chain_length(double epsilon, double eta);

/// Mid-chain row (1-based) at which limits are read: round(n / 2).
[[nodiscard]] std::size_t limit_row(std::size_t n);

/// One report per channel use. The first and last `edge_width` rows are
/// flagged transient. Limits are read at limit_row(n); they count as
/// converged when both step differences there fall below kConvergenceTolerance.
[[nodiscard]] MIProfile mi_profile(const EffectiveCoupling& eff, const SourceParams& source,
                                   std::size_t edge_width = 1);

struct MCEstimate {
  double i_est = 0.0;
  double i_prime_est = 0.0;
  double std_err = 0.0;        // of i_est
  double std_err_prime = 0.0;  // of i_prime_est
  std::size_t samples = 0;
};

inline constexpr std::size_t kMinMonteCarloSamples = 10'000;

/// Monte-Carlo estimate of (I, I') for output k (1-based).
///
/// Samples one real quadrature of every input amplitude (variance N/2) and of
/// the heterodyne noise (variance 1/2), forms gamma_k = sum_l f~(k,l) alpha_l
/// + noise, and evaluates the plug-in Gaussian MI from sample covariances.
/// I' is taken against the interference term sum_{l != k} f~(k,l) alpha_l,
/// which carries all the dependence of gamma_k on the other inputs.
/// Standard errors come from 100 batch means.
///
/// Throws ParameterError if samples < kMinMonteCarloSamples and NumericError
/// on a degenerate sample covariance.
[[nodiscard]] MCEstimate mc_mi_estimate(const EffectiveCoupling& eff, const SourceParams& source,
                                        std::size_t k, std::size_t samples, std::uint64_t seed);

}  // namespace memchan
