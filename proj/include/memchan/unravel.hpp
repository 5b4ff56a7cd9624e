#pragma once

#include <cstddef>

#include <Eigen/Dense>

#include "memchan/channel_model.hpp"
#include "memchan/unitary_synthesis.hpp"

namespace memchan {

/// SVD of the input coupling, f = V^T diag(sqrt(eta_eff)) U.
///
/// Collective inputs A = U a and outputs B = V b see independent
/// attenuators with transmissivities eta_eff (sorted descending).
struct UnravelResult {
  Eigen::MatrixXd u_matrix;
  Eigen::MatrixXd v_matrix;
  Eigen::VectorXd eta_eff;
};

/// Coupling seen between processed inputs A = pre a and outputs B = post b.
struct EffectiveCoupling {
  Eigen::MatrixXd f_tilde;
  Eigen::MatrixXd g_tilde;
  Eigen::VectorXd t_tilde;

  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(f_tilde.rows()); }
};

/// Tolerance for treating V f U^T as diagonal: 1e-10, growing linearly in n past 256.
[[nodiscard]] double diagonal_tolerance(std::size_t n);

/// Throws NumericError if the decomposition fails or is not finite.
[[nodiscard]] UnravelResult svd_unravel(const Eigen::MatrixXd& f);

/// f~ = post f pre^T, g~ = post g, t~ = post t.
///
/// Throws DimensionError on shape mismatch and ParameterError if either
/// matrix is not orthogonal within 1e-10.
[[nodiscard]] EffectiveCoupling effective_coupling(const CouplingMatrices& c,
                                                   const Eigen::MatrixXd& pre,
                                                   const Eigen::MatrixXd& post);

/// Same contract, applying staircase networks block by block in O(n^2 l^2).
[[nodiscard]] EffectiveCoupling effective_coupling(const CouplingMatrices& c,
                                                   const StaircaseNetwork& pre,
                                                   const StaircaseNetwork& post);

/// Largest |row norm^2 - 1| over the rows of [f~ | g~ | t~].
[[nodiscard]] double row_norm_defect(const EffectiveCoupling& e);

}  // namespace memchan
