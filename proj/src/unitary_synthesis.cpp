#include "memchan/unitary_synthesis.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "memchan/errors.hpp"

namespace memchan {

namespace {

constexpr double kBlockTolerance = 1e-10;

void require_finite(double angle) {
  if (!std::isfinite(angle)) throw ParameterError("beam-splitter angle must be finite");
}

}  // namespace

double canonical_angle(double theta) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = theta - two_pi * std::floor((theta + std::numbers::pi) / two_pi);
  if (r >= std::numbers::pi) r -= two_pi;
  if (r < -std::numbers::pi) r = -std::numbers::pi;
  return r;
}

Eigen::Matrix2d Rotation2::matrix() const { return rotation2(theta); }

Eigen::Matrix3d Euler3::matrix() const { return euler3(gamma, theta, phi); }

Eigen::Matrix2d rotation2(double theta) {
  require_finite(theta);
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Eigen::Matrix2d r;
  r << c, s, -s, c;
  return r;
}

Eigen::Matrix3d euler3(double gamma, double theta, double phi) {
  require_finite(gamma);
  require_finite(theta);
  require_finite(phi);
  Eigen::Matrix3d left = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d middle = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d right = Eigen::Matrix3d::Identity();
  left.bottomRightCorner<2, 2>() = rotation2(gamma);
  middle.topLeftCorner<2, 2>() = rotation2(theta);
  right.bottomRightCorner<2, 2>() = rotation2(phi);
  return left * middle * right;
}

std::size_t angle_count(std::size_t depth) {
  switch (depth) {
    case 0:
    case 1:
      return 0;
    case 2:
      return 1;
    case 3:
      return 3;
    default:
      throw ParameterError("built-in parameterizations exist only for depth <= 3");
  }
}

Eigen::MatrixXd block_from_angles(std::span<const double> angles) {
  switch (angles.size()) {
    case 0:
      return Eigen::MatrixXd::Identity(1, 1);
    case 1:
      return rotation2(angles[0]);
    case 3:
      return euler3(angles[0], angles[1], angles[2]);
    default: {
      std::ostringstream msg;
      msg << "expected 0, 1 or 3 angles, got " << angles.size();
      throw ParameterError(msg.str());
    }
  }
}

StaircaseNetwork::StaircaseNetwork(Eigen::MatrixXd block, std::size_t n_modes)
    : block_(std::move(block)), n_modes_(n_modes) {
  if (block_.rows() == 0 || block_.rows() != block_.cols())
    throw DimensionError("staircase block must be square and non-empty");
  if (n_modes_ < depth()) {
    std::ostringstream msg;
    msg << "staircase needs n_modes >= block size (" << n_modes_ << " < " << depth() << ")";
    throw DimensionError(msg.str());
  }
  if (!block_.allFinite() || orthogonality_defect(block_) > kBlockTolerance)
    throw ParameterError("staircase block is not orthogonal");
  if (std::abs(block_.determinant() - 1.0) > kBlockTolerance)
    throw ParameterError("staircase block must have determinant +1");
}

StaircaseNetwork StaircaseNetwork::identity(std::size_t n_modes) {
  return StaircaseNetwork(Eigen::MatrixXd::Identity(1, 1), n_modes);
}

Eigen::MatrixXd StaircaseNetwork::matrix() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n_modes_, n_modes_);
  apply_left(m);
  return m;
}

Eigen::RowVectorXd StaircaseNetwork::row(std::size_t i) const {
  const auto l = static_cast<Eigen::Index>(depth());
  Eigen::RowVectorXd r = Eigen::RowVectorXd::Unit(n_modes_, i);
  // Copies starting right of mode i leave e_i^T untouched.
  const auto last = static_cast<Eigen::Index>(std::min(copies() - 1, i));
  for (Eigen::Index j = last; j >= 0; --j) {
    r.segment(j, l) = r.segment(j, l) * block_;
  }
  return r;
}

void StaircaseNetwork::apply(Eigen::Ref<Eigen::VectorXd> x) const {
  const auto l = static_cast<Eigen::Index>(depth());
  const auto count = static_cast<Eigen::Index>(copies());
  for (Eigen::Index j = 0; j < count; ++j) x.segment(j, l) = block_ * x.segment(j, l);
}

void StaircaseNetwork::apply_transpose(Eigen::Ref<Eigen::VectorXd> x) const {
  const auto l = static_cast<Eigen::Index>(depth());
  for (auto j = static_cast<Eigen::Index>(copies()) - 1; j >= 0; --j)
    x.segment(j, l) = block_.transpose() * x.segment(j, l);
}

void StaircaseNetwork::apply_left(Eigen::Ref<Eigen::MatrixXd> a) const {
  if (static_cast<std::size_t>(a.rows()) != n_modes_) throw DimensionError("row count mismatch");
  const auto l = static_cast<Eigen::Index>(depth());
  const auto count = static_cast<Eigen::Index>(copies());
  for (Eigen::Index j = 0; j < count; ++j) {
    a.middleRows(j, l) = (block_ * a.middleRows(j, l)).eval();
  }
}

void StaircaseNetwork::apply_right_transpose(Eigen::Ref<Eigen::MatrixXd> a) const {
  if (static_cast<std::size_t>(a.cols()) != n_modes_) throw DimensionError("column count mismatch");
  const auto l = static_cast<Eigen::Index>(depth());
  const auto count = static_cast<Eigen::Index>(copies());
  // (M A^T)^T
  for (Eigen::Index j = 0; j < count; ++j) {
    a.middleCols(j, l) = (a.middleCols(j, l) * block_.transpose()).eval();
  }
}

StaircaseNetwork staircase(const Eigen::MatrixXd& block, std::size_t n_modes) {
  return StaircaseNetwork(block, n_modes);
}

double orthogonality_defect(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw DimensionError("orthogonality check needs a square matrix");
  return (m * m.transpose() - Eigen::MatrixXd::Identity(m.rows(), m.cols())).cwiseAbs().maxCoeff();
}

}  // namespace memchan
