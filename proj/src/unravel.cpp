#include "memchan/unravel.hpp"

#include <algorithm>
#include <sstream>

#include <Eigen/SVD>

#include "memchan/errors.hpp"

namespace memchan {

namespace {

constexpr double kOrthogonalTolerance = 1e-10;

void require_orthogonal(const Eigen::MatrixXd& m, Eigen::Index n, const char* name) {
  if (m.rows() != n || m.cols() != n) {
    std::ostringstream msg;
    msg << name << " must be " << n << "x" << n << ", got " << m.rows() << "x" << m.cols();
    throw DimensionError(msg.str());
  }
  if (!m.allFinite() || orthogonality_defect(m) > kOrthogonalTolerance) {
    throw ParameterError(std::string(name) + " is not orthogonal");
  }
}

void require_square_coupling(const CouplingMatrices& c) {
  const auto n = c.f.rows();
  if (c.f.cols() != n || c.g.rows() != n || c.g.cols() != n || c.t.size() != n)
    throw DimensionError("coupling matrices have inconsistent shapes");
}

}  // namespace

double diagonal_tolerance(std::size_t n) {
  return 1e-10 * std::max(1.0, static_cast<double>(n) / 256.0);
}

UnravelResult svd_unravel(const Eigen::MatrixXd& f) {
  if (f.rows() != f.cols() || f.rows() == 0) throw DimensionError("svd_unravel needs a square matrix");
  if (!f.allFinite()) throw NumericError("svd_unravel: input has non-finite entries");

  Eigen::BDCSVD<Eigen::MatrixXd> svd(f, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.info() != Eigen::Success) throw NumericError("svd_unravel: decomposition failed");

  // f = W S Z^T, so V = W^T and U = Z^T give V f U^T = S >= 0.
  UnravelResult r;
  r.v_matrix = svd.matrixU().transpose();
  r.u_matrix = svd.matrixV().transpose();
  r.eta_eff = svd.singularValues().array().square().matrix();
  if (!r.u_matrix.allFinite() || !r.v_matrix.allFinite() || !r.eta_eff.allFinite())
    throw NumericError("svd_unravel: decomposition produced non-finite values");
  return r;
}

EffectiveCoupling effective_coupling(const CouplingMatrices& c, const Eigen::MatrixXd& pre,
                                     const Eigen::MatrixXd& post) {
  require_square_coupling(c);
  const auto n = c.f.rows();
  require_orthogonal(pre, n, "pre-processing matrix");
  require_orthogonal(post, n, "post-processing matrix");

  EffectiveCoupling e;
  e.f_tilde = post * c.f * pre.transpose();
  e.g_tilde = post * c.g;
  e.t_tilde = post * c.t;
  return e;
}

EffectiveCoupling effective_coupling(const CouplingMatrices& c, const StaircaseNetwork& pre,
                                     const StaircaseNetwork& post) {
  require_square_coupling(c);
  const auto n = c.size();
  if (pre.n_modes() != n || post.n_modes() != n) {
    std::ostringstream msg;
    msg << "networks must act on " << n << " modes";
    throw DimensionError(msg.str());
  }

  EffectiveCoupling e{c.f, c.g, c.t};
  post.apply_left(e.f_tilde);
  pre.apply_right_transpose(e.f_tilde);
  post.apply_left(e.g_tilde);
  post.apply(e.t_tilde);
  return e;
}

double row_norm_defect(const EffectiveCoupling& e) {
  const Eigen::VectorXd norms = e.f_tilde.rowwise().squaredNorm() + e.g_tilde.rowwise().squaredNorm() +
                                e.t_tilde.cwiseAbs2();
  return (norms.array() - 1.0).abs().maxCoeff();
}

}  // namespace memchan
