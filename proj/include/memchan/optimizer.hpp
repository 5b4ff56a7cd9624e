#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "memchan/channel_model.hpp"
#include "memchan/mutual_info.hpp"

namespace memchan {

enum class Objective { maximize_i, minimize_i_prime, joint };

/// Search for depth-2 or depth-3 staircase pre/post-processing.
///
/// Every evaluation uses the chain of channel.n_uses modes and reads I, I'
/// at the mid-chain row limit_row(n_uses).
struct OptimizationProblem {
  ChannelParams channel;
  SourceParams source;
  std::size_t depth = 2;
  Objective objective = Objective::joint;

  void validate() const;
};

/// Problem whose chain length follows limit_chain_length(epsilon, eta).
[[nodiscard]] OptimizationProblem make_problem(double epsilon, double eta, double mean_photons,
                                               std::size_t depth,
                                               Objective objective = Objective::joint);

struct SearchConfig {
  std::size_t grid_resolution = 0;  // points per angle; 0 picks 64 (depth 2) or 12 (depth 3)
  std::size_t max_refine_evaluations = 2000;
  double function_tolerance = 1e-10;
};

struct OptimizationResult {
  std::vector<double> angles_pre;
  std::vector<double> angles_post;
  double i_opt = 0.0;
  double i_prime_opt = 0.0;
  std::size_t evaluations = 0;
  bool joint_consistent = true;
  bool refinement_converged = true;

  // I' at the reported angles; equals i_prime_opt unless the joint objective
  // found a separate I' minimum.
  double i_prime_at_angles = 0.0;
  // Location and I value of the independent I' minimum (joint objective).
  std::vector<double> angles_pre_min_i_prime;
  std::vector<double> angles_post_min_i_prime;
  double i_at_min_i_prime = 0.0;

  double baseline_i = 0.0;
  double baseline_i_prime = 0.0;
  std::size_t row = 0;  // 1-based row the objective was read from
};

/// Tolerance of the |I'(argmax I) - min I'| consistency check.
inline constexpr double kJointTolerance = 1e-6;

/// (I, I') of the mid-chain output after staircase processing, computed one
/// row at a time in O(n^2) per call.
class RowEvaluator {
 public:
  struct Value {
    double f_kk = 0.0;
    double mu = 0.0;
    MIPair mi;
  };

  /// k is 1-based.
  RowEvaluator(const CouplingMatrices& coupling, SourceParams source, std::size_t k);

  [[nodiscard]] Value operator()(std::span<const double> pre_angles,
                                 std::span<const double> post_angles) const;

  [[nodiscard]] std::size_t row() const { return k_; }
  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(f_.rows()); }

 private:
  Eigen::MatrixXd f_;
  SourceParams source_;
  std::size_t k_;
};

/// Angles -pi + 2 pi i / resolution, i = 0..resolution-1.
[[nodiscard]] std::vector<double> grid_angles(std::size_t resolution);

/// Coarse grid followed by simplex refinement.
[[nodiscard]] OptimizationResult optimize(const OptimizationProblem& problem,
                                          const SearchConfig& config = {});

/// Exhaustive search over the angle grid, evaluating each cell independently.
/// Throws ParameterError for resolution < 8 or more than 1e7 cells.
[[nodiscard]] OptimizationResult grid_oracle(const OptimizationProblem& problem, std::size_t resolution);

/// (I, I') with identity pre/post-processing at the problem's mid-chain row.
[[nodiscard]] MIPair baseline_mi(const OptimizationProblem& problem);

}  // namespace memchan
