#pragma once

#include <cstddef>
#include <span>

#include <Eigen/Dense>

namespace memchan {

/// Maps an angle onto its representative in [-pi, pi).
[[nodiscard]] double canonical_angle(double theta);

/// Two-mode beam splitter [[cos, sin], [-sin, cos]].
struct Rotation2 {
  double theta = 0.0;

  [[nodiscard]] Eigen::Matrix2d matrix() const;
};

/// Three-mode interferometer R23(gamma) * R12(theta) * R23(phi).
struct Euler3 {
  double gamma = 0.0;
  double theta = 0.0;
  double phi = 0.0;

  [[nodiscard]] Eigen::Matrix3d matrix() const;
};

/// Throws ParameterError on a non-finite angle.
[[nodiscard]] Eigen::Matrix2d rotation2(double theta);
[[nodiscard]] Eigen::Matrix3d euler3(double gamma, double theta, double phi);

/// Block of depth `angles.size() + 1` from its beam-splitter angles:
/// empty -> 1x1 identity, one angle -> rotation2, three angles -> euler3.
[[nodiscard]] Eigen::MatrixXd block_from_angles(std::span<const double> angles);

/// Number of angles parameterizing a block of the given depth (0, 1 or 3).
[[nodiscard]] std::size_t angle_count(std::size_t depth);

/// n-mode orthogonal network built from copies of an l-mode block, each
/// shifted by one mode so that l-1 outputs of one copy feed the next:
///
///   M = B_{n-l} ... B_1 B_0,   B_j = I_j (+) block (+) I_{n-l-j}.
///
/// B_0 (touching modes 0..l-1) acts first. Row i of M vanishes beyond
/// column i + l - 1.
class StaircaseNetwork {
 public:
  /// Throws DimensionError if n_modes < block size, ParameterError if the
  /// block is not special orthogonal within 1e-10.
  StaircaseNetwork(Eigen::MatrixXd block, std::size_t n_modes);

  /// Network acting as the identity on n modes (depth 1, block [1]).
  static StaircaseNetwork identity(std::size_t n_modes);

  [[nodiscard]] const Eigen::MatrixXd& block() const { return block_; }
  [[nodiscard]] std::size_t depth() const { return static_cast<std::size_t>(block_.rows()); }
  [[nodiscard]] std::size_t n_modes() const { return n_modes_; }

  /// Dense n x n matrix of the network.
  [[nodiscard]] Eigen::MatrixXd matrix() const;

  /// Row `i` of matrix() in O(i * l^2) without forming the matrix.
  [[nodiscard]] Eigen::RowVectorXd row(std::size_t i) const;

  /// x <- M x
  void apply(Eigen::Ref<Eigen::VectorXd> x) const;
  /// x <- M^T x
  void apply_transpose(Eigen::Ref<Eigen::VectorXd> x) const;
  /// A <- M A
  void apply_left(Eigen::Ref<Eigen::MatrixXd> a) const;
  /// A <- A M^T
  void apply_right_transpose(Eigen::Ref<Eigen::MatrixXd> a) const;

 private:
  std::size_t copies() const { return n_modes_ - depth() + 1; }

  Eigen::MatrixXd block_;
  std::size_t n_modes_;
};

[[nodiscard]] StaircaseNetwork staircase(const Eigen::MatrixXd& block, std::size_t n_modes);

/// Largest |M M^T - I| entry.
[[nodiscard]] double orthogonality_defect(const Eigen::MatrixXd& m);

}  // namespace memchan
