#pragma once

#include <cstddef>

#include <Eigen/Dense>

namespace memchan {

/// One instance of the lossy memory channel over `n_uses` consecutive uses.
///
/// Each use is two beam splitters: the memory mode first mixes with a
/// vacuum environment mode (transmissivity `epsilon`), then with the input
/// signal (transmissivity `eta`). `epsilon == 0` is the memoryless
/// attenuator; `epsilon == 1` is the perfect-memory channel.
struct ChannelParams {
  double epsilon = 0.0;
  double eta = 1.0;
  std::size_t n_uses = 1;

  /// Throws ParameterError unless 0 <= epsilon, eta <= 1 and n_uses >= 1.
  void validate() const;
};

/// Linear input-output relations of the channel in the Heisenberg picture:
///
///   b_k = sum_j f(k,j) a_j + sum_j g(k,j) e_j + t(k) m_1
///
/// where a_j are inputs, e_j local environment modes and m_1 the initial
/// memory mode. Rows of [f | g | t] are orthonormal.
struct CouplingMatrices {
  Eigen::MatrixXd f;
  Eigen::MatrixXd g;
  Eigen::VectorXd t;

  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(f.rows()); }
};

/// Closed-form coefficients obtained by unrolling the memory recursion.
[[nodiscard]] CouplingMatrices build_coupling(const ChannelParams& params);

/// Coefficients obtained by literally iterating the single-use map and
/// tracking the memory mode's expansion. Independent cross-check of
/// build_coupling.
[[nodiscard]] CouplingMatrices step_oracle(const ChannelParams& params);

/// max |G - I| with G the Gram matrix of the rows of [f | g | t].
[[nodiscard]] double row_isometry_defect(const CouplingMatrices& c);

}  // namespace memchan
