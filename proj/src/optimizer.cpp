#include "memchan/optimizer.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>

#include "memchan/errors.hpp"
#include "memchan/unitary_synthesis.hpp"

namespace memchan {

namespace {

constexpr double kTieTolerance = 1e-12;
constexpr double kMaxGridCells = 1e7;
constexpr double kSimplexSizeTolerance = 1e-9;
constexpr double kSimplexLocalized = 1e-5;
constexpr std::size_t kStagnationFactor = 5;

std::size_t default_resolution(std::size_t depth) { return depth == 2 ? 64 : 12; }

// Which single quantity a search ranks by; larger score is better.
enum class Target { max_i, min_i_prime };

double score(const MIPair& mi, Target target) {
  return target == Target::max_i ? mi.i_value : -mi.i_prime_value;
}

// Angles are stored pre first, then post.
struct Candidate {
  std::vector<double> angles;
  MIPair mi;
  double score = 0.0;
  bool valid = false;
};

bool lex_abs_less(const std::vector<double>& a, const std::vector<double>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(),
                                      [](double x, double y) { return std::abs(x) < std::abs(y); });
}

// Among candidates within kTieTolerance of the best score, keep the smallest
// lexicographic |angles|.
class BestTracker {
 public:
  explicit BestTracker(Target target) : target_(target) {}

  void offer(const std::vector<double>& angles, const MIPair& mi) {
    const double s = score(mi, target_);
    if (!best_.valid || s > best_.score + kTieTolerance ||
        (s >= best_.score - kTieTolerance && lex_abs_less(angles, best_.angles))) {
      best_.score = s;
      best_.angles = angles;
      best_.mi = mi;
      best_.valid = true;
    }
  }

  [[nodiscard]] const Candidate& best() const { return best_; }

 private:
  Target target_;
  Candidate best_;
};

std::vector<Target> targets_for(Objective objective) {
  switch (objective) {
    case Objective::maximize_i:
      return {Target::max_i};
    case Objective::minimize_i_prime:
      return {Target::min_i_prime};
    case Objective::joint:
      break;
  }
  return {Target::max_i, Target::min_i_prime};
}

// All angle tuples of length p on the grid; row i spells i in base
// `resolution`, most significant angle first.
Eigen::MatrixXd grid_tuples(const std::vector<double>& axis, std::size_t p) {
  const auto res = static_cast<Eigen::Index>(axis.size());
  Eigen::Index count = 1;
  for (std::size_t i = 0; i < p; ++i) count *= res;
  Eigen::MatrixXd tuples(count, static_cast<Eigen::Index>(p));
  for (Eigen::Index i = 0; i < count; ++i) {
    Eigen::Index rest = i;
    for (auto j = static_cast<Eigen::Index>(p) - 1; j >= 0; --j) {
      tuples(i, j) = axis[static_cast<std::size_t>(rest % res)];
      rest /= res;
    }
  }
  return tuples;
}

std::vector<double> join(const Eigen::RowVectorXd& pre, const Eigen::RowVectorXd& post) {
  std::vector<double> out(pre.data(), pre.data() + pre.size());
  out.insert(out.end(), post.data(), post.data() + post.size());
  return out;
}

std::vector<double> row_to_vector(const Eigen::RowVectorXd& r) { return {r.data(), r.data() + r.size()}; }

void check_grid(std::size_t resolution, std::size_t p) {
  if (resolution < 8) throw ParameterError("grid resolution must be at least 8");
  if (std::pow(static_cast<double>(resolution), static_cast<double>(2 * p)) > kMaxGridCells) {
    std::ostringstream msg;
    msg << "grid of " << resolution << "^" << 2 * p << " cells exceeds the 1e7 cap";
    throw ParameterError(msg.str());
  }
}

MIPair mi_from_row_stats(double f_kk, double row_norm2, const SourceParams& source) {
  // Clamp the round-off of the norm difference; row_norm2 <= 1 up to rounding.
  const double mu2 = std::max(0.0, row_norm2 - f_kk * f_kk);
  return mi_pair(f_kk, std::sqrt(mu2), source);
}

// Grid stage: row k of every post network times f, against row k of every
// pre network, in one matrix product.
std::vector<Candidate> batched_grid(const CouplingMatrices& c, const SourceParams& source, std::size_t k,
                                    std::size_t p, std::size_t resolution, const std::vector<Target>& targets) {
  const std::size_t n = c.size();
  const Eigen::MatrixXd tuples = grid_tuples(grid_angles(resolution), p);
  const Eigen::Index count = tuples.rows();

  Eigen::MatrixXd pre_rows(count, static_cast<Eigen::Index>(n));
  Eigen::MatrixXd post_rows(count, static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < count; ++i) {
    const Eigen::RowVectorXd a = tuples.row(i);
    const StaircaseNetwork net(block_from_angles(std::span<const double>(a.data(), p)), n);
    pre_rows.row(i) = net.row(k - 1);
  }
  post_rows = pre_rows * c.f;  // same networks on the output side
  const Eigen::VectorXd norms = post_rows.rowwise().squaredNorm();
  const Eigen::MatrixXd diag = post_rows * pre_rows.transpose();  // (post, pre) -> f~(k,k)

  std::vector<BestTracker> trackers;
  for (Target t : targets) trackers.emplace_back(t);
  for (Eigen::Index pre = 0; pre < count; ++pre) {
    for (Eigen::Index post = 0; post < count; ++post) {
      const MIPair mi = mi_from_row_stats(diag(post, pre), norms(post), source);
      const auto angles = join(tuples.row(pre), tuples.row(post));
      for (auto& tr : trackers) tr.offer(angles, mi);
    }
  }
  std::vector<Candidate> out;
  for (const auto& tr : trackers) out.push_back(tr.best());
  return out;
}

struct SimplexContext {
  const RowEvaluator* evaluator = nullptr;
  std::size_t p = 0;
  Target target = Target::max_i;
  std::size_t evaluations = 0;
};

double simplex_cost(const gsl_vector* x, void* params) {
  auto* ctx = static_cast<SimplexContext*>(params);
  const std::size_t p = ctx->p;
  std::vector<double> pre(p), post(p);
  for (std::size_t i = 0; i < p; ++i) {
    pre[i] = gsl_vector_get(x, i);
    post[i] = gsl_vector_get(x, p + i);
  }
  ++ctx->evaluations;
  return -score((*ctx->evaluator)(pre, post).mi, ctx->target);
}

struct MinimizerDeleter {
  void operator()(gsl_multimin_fminimizer* m) const { gsl_multimin_fminimizer_free(m); }
};
struct VectorDeleter {
  void operator()(gsl_vector* v) const { gsl_vector_free(v); }
};

Candidate evaluate(const RowEvaluator& evaluator, const std::vector<double>& angles, std::size_t p,
                   Target target) {
  const std::span<const double> all(angles);
  Candidate c;
  c.angles = angles;
  c.mi = evaluator(all.first(p), all.subspan(p, p)).mi;
  c.score = score(c.mi, target);
  c.valid = true;
  return c;
}

struct RefineOutcome {
  Candidate best;
  std::size_t evaluations = 0;
  bool converged = true;
};

RefineOutcome refine(const RowEvaluator& evaluator, std::size_t p, Target target, const Candidate& start,
                     double step, const SearchConfig& config) {
  RefineOutcome out;
  out.best = evaluate(evaluator, start.angles, p, target);
  out.evaluations = 1;
  if (config.max_refine_evaluations == 0 || p == 0) return out;

  const std::size_t dim = 2 * p;
  SimplexContext ctx{&evaluator, p, target, 0};
  gsl_multimin_function fn{&simplex_cost, dim, &ctx};

  std::unique_ptr<gsl_vector, VectorDeleter> x(gsl_vector_alloc(dim));
  std::unique_ptr<gsl_vector, VectorDeleter> steps(gsl_vector_alloc(dim));
  gsl_vector_set_all(steps.get(), step);
  std::unique_ptr<gsl_multimin_fminimizer, MinimizerDeleter> simplex(
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, dim));

  // One simplex pass stops when the simplex has collapsed, or when the best
  // value moved less than the tolerance over a window of iterations (a longer
  // window while the simplex is still large). Passes restart from the best
  // point until one no longer improves.
  const std::size_t window = 4 * (dim + 1);
  std::vector<double> centre = start.angles;
  double centre_cost = -out.best.score;
  bool converged = false;
  while (!converged && ctx.evaluations < config.max_refine_evaluations) {
    for (std::size_t i = 0; i < dim; ++i) gsl_vector_set(x.get(), i, centre[i]);
    if (gsl_multimin_fminimizer_set(simplex.get(), &fn, x.get(), steps.get()) != GSL_SUCCESS)
      throw NumericError("simplex refinement failed to initialize");
    std::vector<double> history{centre_cost};  // set() leaves fval unassigned
    bool pass_done = false;
    while (ctx.evaluations < config.max_refine_evaluations) {
      if (gsl_multimin_fminimizer_iterate(simplex.get()) != GSL_SUCCESS) {
        pass_done = true;
        break;
      }
      history.push_back(simplex->fval);
      const double size = gsl_multimin_fminimizer_size(simplex.get());
      if (gsl_multimin_test_size(size, kSimplexSizeTolerance) == GSL_SUCCESS) {
        pass_done = true;
        break;
      }
      auto stalled_over = [&](std::size_t iterations) {
        return history.size() > iterations &&
               history[history.size() - 1 - iterations] - history.back() < config.function_tolerance;
      };
      if ((size < kSimplexLocalized && stalled_over(window)) || stalled_over(kStagnationFactor * window)) {
        pass_done = true;
        break;
      }
    }
    if (!pass_done) break;
    const bool improved = simplex->fval < centre_cost - config.function_tolerance;
    if (simplex->fval < centre_cost) {
      centre_cost = simplex->fval;
      for (std::size_t i = 0; i < dim; ++i) centre[i] = gsl_vector_get(simplex->x, i);
    }
    converged = !improved;
  }
  out.evaluations += ctx.evaluations;
  out.converged = converged;

  for (auto& a : centre) a = canonical_angle(a);
  const Candidate refined = evaluate(evaluator, centre, p, target);
  ++out.evaluations;
  if (refined.score > out.best.score + kTieTolerance) out.best = refined;
  return out;
}

}  // namespace

void OptimizationProblem::validate() const {
  channel.validate();
  source.validate();
  if (depth != 2 && depth != 3) throw ParameterError("optimization supports depth 2 or 3");
  if (channel.n_uses < depth) throw ParameterError("chain shorter than the network depth");
}

OptimizationProblem make_problem(double epsilon, double eta, double mean_photons, std::size_t depth,
                                 Objective objective) {
  OptimizationProblem p;
  p.channel = ChannelParams{epsilon, eta, limit_chain_length(epsilon, eta)};
  p.source = SourceParams{mean_photons};
  p.depth = depth;
  p.objective = objective;
  return p;
}

RowEvaluator::RowEvaluator(const CouplingMatrices& coupling, SourceParams source, std::size_t k)
    : f_(coupling.f), source_(source), k_(k) {
  source_.validate();
  if (k_ < 1 || k_ > size()) throw DimensionError("RowEvaluator: row index out of range");
}

RowEvaluator::Value RowEvaluator::operator()(std::span<const double> pre_angles,
                                             std::span<const double> post_angles) const {
  const std::size_t n = size();
  const StaircaseNetwork post(block_from_angles(post_angles), n);
  const StaircaseNetwork pre(block_from_angles(pre_angles), n);

  // (v_k f U^T)^T = U (v_k f)^T
  Eigen::VectorXd x = (post.row(k_ - 1) * f_).transpose();
  pre.apply(x);

  const auto kk = static_cast<Eigen::Index>(k_ - 1);
  double off = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j)
    if (j != kk) off += x(j) * x(j);

  Value v;
  v.f_kk = x(kk);
  v.mu = std::sqrt(off);
  v.mi = mi_pair(v.f_kk, v.mu, source_);
  return v;
}

std::vector<double> grid_angles(std::size_t resolution) {
  std::vector<double> axis(resolution);
  for (std::size_t i = 0; i < resolution; ++i)
    axis[i] = -std::numbers::pi + 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(resolution);
  // Snap the representative of zero exactly.
  for (auto& a : axis)
    if (std::abs(a) < 1e-14) a = 0.0;
  return axis;
}

MIPair baseline_mi(const OptimizationProblem& problem) {
  problem.channel.validate();
  const auto c = build_coupling(problem.channel);
  const std::size_t k = limit_row(problem.channel.n_uses);
  return mi_pair(c.f(k - 1, k - 1), residual_mu(c.f, k), problem.source);
}

OptimizationResult optimize(const OptimizationProblem& problem, const SearchConfig& config) {
  problem.validate();
  static const bool handler_off = [] {
    gsl_set_error_handler_off();
    return true;
  }();
  (void)handler_off;

  const std::size_t p = angle_count(problem.depth);
  const std::size_t resolution = config.grid_resolution ? config.grid_resolution : default_resolution(problem.depth);
  check_grid(resolution, p);

  const auto coupling = build_coupling(problem.channel);
  const std::size_t k = limit_row(problem.channel.n_uses);
  const RowEvaluator evaluator(coupling, problem.source, k);
  const std::vector<Target> targets = targets_for(problem.objective);

  OptimizationResult result;
  result.row = k;
  const std::vector<double> zeros(2 * p, 0.0);
  const auto baseline = evaluator(std::span(zeros).first(p), std::span(zeros).subspan(p)).mi;
  result.baseline_i = baseline.i_value;
  result.baseline_i_prime = baseline.i_prime_value;

  const auto grid = batched_grid(coupling, problem.source, k, p, resolution, targets);
  result.evaluations = static_cast<std::size_t>(std::pow(static_cast<double>(resolution), 2.0 * p)) + 1;

  // Depth 2 is the special case gamma = phi = 0 of depth 3; seed from it.
  std::optional<OptimizationResult> nested;
  if (problem.depth == 3) {
    OptimizationProblem shallow = problem;
    shallow.depth = 2;
    nested = optimize(shallow, SearchConfig{0, config.max_refine_evaluations, config.function_tolerance});
    result.evaluations += nested->evaluations;
  }

  const double step = 2.0 * std::numbers::pi / static_cast<double>(resolution);
  auto run_starts = [&](Target target, const std::vector<std::vector<double>>& starts, Candidate best) {
    for (const auto& angles : starts) {
      const auto r = refine(evaluator, p, target, evaluate(evaluator, angles, p, target), step, config);
      result.evaluations += r.evaluations + 1;
      result.refinement_converged = result.refinement_converged && r.converged;
      if (!best.valid || r.best.score > best.score + kTieTolerance) best = r.best;
    }
    return best;
  };

  std::vector<Candidate> winners;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    std::vector<std::vector<double>> starts{grid[t].angles, zeros};
    if (nested) {
      starts.push_back({0.0, nested->angles_pre[0], 0.0, 0.0, nested->angles_post[0], 0.0});
      if (problem.objective == Objective::joint)
        starts.push_back({0.0, nested->angles_pre_min_i_prime[0], 0.0, 0.0, nested->angles_post_min_i_prime[0], 0.0});
    }
    winners.push_back(run_starts(targets[t], starts, Candidate{}));
  }
  // Each optimum of the joint search also seeds the other quantity.
  if (winners.size() == 2) {
    const auto i_best = winners[0].angles;
    const auto ip_best = winners[1].angles;
    winners[0] = run_starts(targets[0], {ip_best}, winners[0]);
    winners[1] = run_starts(targets[1], {i_best}, winners[1]);
  }

  auto split = [p](const Candidate& c, std::vector<double>& pre, std::vector<double>& post) {
    pre.assign(c.angles.begin(), c.angles.begin() + static_cast<std::ptrdiff_t>(p));
    post.assign(c.angles.begin() + static_cast<std::ptrdiff_t>(p), c.angles.end());
    for (auto& a : pre) a = canonical_angle(a);
    for (auto& a : post) a = canonical_angle(a);
  };

  const Candidate& primary = winners.front();
  split(primary, result.angles_pre, result.angles_post);
  result.i_opt = primary.mi.i_value;
  result.i_prime_opt = primary.mi.i_prime_value;
  result.i_prime_at_angles = primary.mi.i_prime_value;
  result.angles_pre_min_i_prime = result.angles_pre;
  result.angles_post_min_i_prime = result.angles_post;
  result.i_at_min_i_prime = primary.mi.i_value;
  if (problem.objective == Objective::joint) {
    const Candidate& low = winners.back();
    split(low, result.angles_pre_min_i_prime, result.angles_post_min_i_prime);
    result.i_prime_opt = low.mi.i_prime_value;
    result.i_at_min_i_prime = low.mi.i_value;
    result.joint_consistent = std::abs(result.i_prime_at_angles - result.i_prime_opt) <= kJointTolerance;
  }
  return result;
}

OptimizationResult grid_oracle(const OptimizationProblem& problem, std::size_t resolution) {
  problem.validate();
  const std::size_t p = angle_count(problem.depth);
  check_grid(resolution, p);

  const auto coupling = build_coupling(problem.channel);
  const std::size_t k = limit_row(problem.channel.n_uses);
  const RowEvaluator evaluator(coupling, problem.source, k);
  const std::vector<Target> targets = targets_for(problem.objective);
  const Eigen::MatrixXd tuples = grid_tuples(grid_angles(resolution), p);

  std::vector<BestTracker> trackers;
  for (Target t : targets) trackers.emplace_back(t);
  for (Eigen::Index pre = 0; pre < tuples.rows(); ++pre) {
    const auto pre_angles = row_to_vector(tuples.row(pre));
    for (Eigen::Index post = 0; post < tuples.rows(); ++post) {
      const auto post_angles = row_to_vector(tuples.row(post));
      const MIPair mi = evaluator(pre_angles, post_angles).mi;
      const auto angles = join(tuples.row(pre), tuples.row(post));
      for (auto& tr : trackers) tr.offer(angles, mi);
    }
  }

  OptimizationResult result;
  result.row = k;
  result.evaluations = static_cast<std::size_t>(tuples.rows() * tuples.rows());
  const std::vector<double> zeros(p, 0.0);
  const auto baseline = evaluator(zeros, zeros).mi;
  result.baseline_i = baseline.i_value;
  result.baseline_i_prime = baseline.i_prime_value;

  const Candidate& primary = trackers.front().best();
  result.angles_pre.assign(primary.angles.begin(), primary.angles.begin() + static_cast<std::ptrdiff_t>(p));
  result.angles_post.assign(primary.angles.begin() + static_cast<std::ptrdiff_t>(p), primary.angles.end());
  result.i_opt = primary.mi.i_value;
  result.i_prime_opt = primary.mi.i_prime_value;
  result.i_prime_at_angles = primary.mi.i_prime_value;
  result.angles_pre_min_i_prime = result.angles_pre;
  result.angles_post_min_i_prime = result.angles_post;
  result.i_at_min_i_prime = primary.mi.i_value;
  if (problem.objective == Objective::joint) {
    const Candidate& low = trackers.back().best();
    result.angles_pre_min_i_prime.assign(low.angles.begin(), low.angles.begin() + static_cast<std::ptrdiff_t>(p));
    result.angles_post_min_i_prime.assign(low.angles.begin() + static_cast<std::ptrdiff_t>(p), low.angles.end());
    result.i_prime_opt = low.mi.i_prime_value;
    result.i_at_min_i_prime = low.mi.i_value;
    result.joint_consistent = std::abs(result.i_prime_at_angles - result.i_prime_opt) <= kJointTolerance;
  }
  return result;
}

}  // namespace memchan
