#include "memchan/channel_model.hpp"

#include <cmath>
#include <sstream>

#include "memchan/errors.hpp"

namespace memchan {

namespace {

bool in_unit_interval(double x) { return std::isfinite(x) && x >= 0.0 && x <= 1.0; }

}  // namespace

void ChannelParams::validate() const {
  if (!in_unit_interval(epsilon) || !in_unit_interval(eta)) {
    std::ostringstream msg;
    msg << "transmissivities must lie in [0,1] (epsilon=" << epsilon << ", eta=" << eta << ")";
    throw ParameterError(msg.str());
  }
  if (n_uses < 1) throw ParameterError("n_uses must be at least 1");
}

CouplingMatrices build_coupling(const ChannelParams& params) {
  params.validate();
  const auto n = static_cast<Eigen::Index>(params.n_uses);
  const double eps = params.epsilon;
  const double eta = params.eta;

  // powers[d] = sqrt(eps*eta)^d, with powers[0] = 1 even when eps*eta = 0
  const double ratio = std::sqrt(eps * eta);
  Eigen::VectorXd powers(n);
  powers(0) = 1.0;
  for (Eigen::Index d = 1; d < n; ++d) powers(d) = powers(d - 1) * ratio;

  const double diag = std::sqrt(eta);
  const double feed = std::sqrt(eps) * (1.0 - eta);
  const double env = std::sqrt((1.0 - eps) * (1.0 - eta));
  const double mem = std::sqrt(eps * (1.0 - eta));

  CouplingMatrices c;
  c.f = Eigen::MatrixXd::Zero(n, n);
  c.g = Eigen::MatrixXd::Zero(n, n);
  c.t.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    c.f(k, k) = diag;
    for (Eigen::Index j = 0; j < k; ++j) c.f(k, j) = -feed * powers(k - j - 1);
    for (Eigen::Index j = 0; j <= k; ++j) c.g(k, j) = -env * powers(k - j);
    // Sign follows the single-use output relation b = ... - sqrt(eps(1-eta)) m.
    c.t(k) = -mem * powers(k);
  }
  return c;
}

CouplingMatrices step_oracle(const ChannelParams& params) {
  params.validate();
  const auto n = static_cast<Eigen::Index>(params.n_uses);
  const double eps = params.epsilon;
  const double eta = params.eta;

  // Every mode is a vector of coefficients over the basis
  // (a_1..a_n, e_1..e_n, m_1).
  const Eigen::Index dim = 2 * n + 1;
  Eigen::VectorXd memory = Eigen::VectorXd::Unit(dim, 2 * n);
  Eigen::MatrixXd rows(n, dim);

  const double s_mm = std::sqrt(eps * eta);
  const double s_ma = std::sqrt(1.0 - eta);
  const double s_me = std::sqrt((1.0 - eps) * eta);
  const double s_ba = std::sqrt(eta);
  const double s_be = std::sqrt((1.0 - eps) * (1.0 - eta));
  const double s_bm = std::sqrt(eps * (1.0 - eta));

  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::VectorXd a = Eigen::VectorXd::Unit(dim, k);
    const Eigen::VectorXd e = Eigen::VectorXd::Unit(dim, n + k);
    rows.row(k) = (s_ba * a - s_be * e - s_bm * memory).transpose();
    memory = s_mm * memory + s_ma * a + s_me * e;
  }

  CouplingMatrices c;
  c.f = rows.leftCols(n);
  c.g = rows.middleCols(n, n);
  c.t = rows.col(2 * n);
  return c;
}

double row_isometry_defect(const CouplingMatrices& c) {
  const auto n = c.f.rows();
  Eigen::MatrixXd rows(n, 2 * n + 1);
  rows << c.f, c.g, c.t;
  const Eigen::MatrixXd gram = rows * rows.transpose();
  return (gram - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
}

}  // namespace memchan
