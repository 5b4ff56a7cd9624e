// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "memchan/channel_model.hpp"
#include "memchan/mutual_info.hpp"
#include "memchan/optimizer.hpp"
#include "memchan/sweep.hpp"
#include "memchan/unitary_synthesis.hpp"
#include "memchan/unravel.hpp"

using namespace memchan;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int failures = 0;

void criterion(const std::string& name, const std::function<bool(std::ostream&)>& body) {
  std::ostringstream detail;
  bool ok = false;
  const auto start = Clock::now();
  try {
    ok = body(detail);
  } catch (const std::exception& e) {
    detail << "exception: " << e.what();
  }
  std::cout << (ok ? "PASS " : "FAIL ") << name << "  " << detail.str() << "  [" << seconds_since(start)
            << " s]" << std::endl;
  failures += ok ? 0 : 1;
}

double max_abs(const Eigen::MatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

// Largest |<r_i, r_j> - delta_ij| over the rows of [f | g | t].
double gram_defect(const CouplingMatrices& c) {
  const auto n = c.f.rows();
  Eigen::MatrixXd rows(n, 2 * n + 1);
  rows << c.f, c.g, c.t;
  return max_abs(rows * rows.transpose() - Eigen::MatrixXd::Identity(n, n));
}

struct SweepRun {
  std::vector<SweepRecord> records;
  std::string csv;
};

std::map<std::tuple<double, double, std::size_t>, const SweepRecord*> index_records(
    const std::vector<SweepRecord>& records) {
  std::map<std::tuple<double, double, std::size_t>, const SweepRecord*> out;
  for (const auto& r : records) out[{r.epsilon, r.eta, r.depth}] = &r;
  return out;
}

SweepConfig figure_sweep(const std::filesystem::path& out) {
  SweepConfig c;
  c.epsilon_grid = default_epsilon_grid();
  c.eta_list = {0.1, 0.5, 0.9};
  c.mean_photons = 1.0;
  c.depths = {0, 2, 3};
  c.output_path = out.string();
  c.seed = 7;
  return c;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main() {
  std::cout.precision(3);
  const auto work_dir = std::filesystem::temp_directory_path() / "memchan_acceptance";
  std::filesystem::create_directories(work_dir);

  criterion("C1 unitarity and closed form vs iteration", [](std::ostream& d) {
    const auto start = Clock::now();
    double worst_gram = 0.0, worst_match = 0.0;
    for (int i = 0; i <= 20; ++i)
      for (int j = 0; j <= 20; ++j)
        for (std::size_t n : {1, 2, 8, 64}) {
          const ChannelParams p{i / 20.0, j / 20.0, n};
          const auto a = build_coupling(p);
          const auto b = step_oracle(p);
          worst_gram = std::max(worst_gram, gram_defect(a));
          worst_match = std::max({worst_match, max_abs(a.f - b.f), max_abs(a.g - b.g), max_abs(a.t - b.t)});
        }
    const double elapsed = seconds_since(start);
    d << "orthonormality=" << worst_gram << " match=" << worst_match << " time=" << elapsed << "s";
    return worst_gram <= 1e-12 && worst_match <= 1e-12 && elapsed < 10.0;
  });

  criterion("C2 complete removal by SVD processing", [](std::ostream& d) {
    double worst_off = 0.0, worst_ip = 0.0, worst_env = 0.0;
    for (int i = 0; i <= 4; ++i)
      for (int j = 0; j <= 4; ++j) {
        const auto c = build_coupling({i / 4.0, j / 4.0, 64});
        const auto u = svd_unravel(c.f);
        const auto e = effective_coupling(c, u.u_matrix, u.v_matrix);
        Eigen::MatrixXd off = e.f_tilde;
        off.diagonal().setZero();
        worst_off = std::max(worst_off, max_abs(off));
        const auto profile = mi_profile(e, {1.0});
        for (const auto& r : profile.reports) worst_ip = std::max(worst_ip, r.i_prime_value);
        for (Eigen::Index k = 0; k < 64; ++k) {
          const double env = e.g_tilde.row(k).squaredNorm() + e.t_tilde(k) * e.t_tilde(k);
          worst_env = std::max(worst_env, std::abs(env - (1.0 - u.eta_eff(k))));
        }
      }
    d << "off-diagonal=" << worst_off << " I'=" << worst_ip << " environment=" << worst_env;
    return worst_off <= 1e-10 && worst_ip <= 1e-10 && worst_env <= 1e-10;
  });

  criterion("C3 memoryless anchor", [](std::ostream& d) {
    double worst = 0.0, worst_ip = 0.0;
    for (double n : {0.5, 1.0, 4.0})
      for (double eta : {0.1, 0.5, 0.9}) {
        const auto mi = baseline_mi(make_problem(0.0, eta, n, 2));
        worst = std::max(worst, std::abs(mi.i_value - 0.5 * std::log2(1 + n * eta)));
        worst_ip = std::max(worst_ip, std::abs(mi.i_prime_value));
        const auto opt = optimize(make_problem(0.0, eta, n, 2));
        worst = std::max(worst, std::abs(opt.i_opt - 0.5 * std::log2(1 + n * eta)));
        worst_ip = std::max(worst_ip, std::abs(opt.i_prime_opt));
      }
    d << "max |I - 0.5 log2(1+N eta)|=" << worst << " max I'=" << worst_ip;
    return worst <= 1e-12 && worst_ip == 0.0;
  });

  criterion("C4 Monte-Carlo oracle agreement", [](std::ostream& d) {
    const auto start = Clock::now();
    constexpr std::size_t n = 64;
    constexpr std::size_t k = 32;
    constexpr std::size_t samples = 1'000'000;
    const std::size_t depths[] = {0, 2, 3};
    struct Config {
      double eps, eta;
      std::size_t depth;
      EffectiveCoupling eff;
      MIPair exact;
    };
    std::vector<Config> configs;
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) {
        const double eps = 0.1 + 0.2 * i, eta = 0.1 + 0.2 * j;
        const std::size_t depth = depths[(i + j) % 3];
        const ChannelParams params{eps, eta, n};
        const auto c = build_coupling(params);
        std::vector<double> pre, post;
        if (depth > 0) {
          const auto r = optimize({params, {1.0}, depth, Objective::maximize_i});
          pre = r.angles_pre;
          post = r.angles_post;
        }
        auto eff = effective_coupling(c, StaircaseNetwork(block_from_angles(pre), n),
                                      StaircaseNetwork(block_from_angles(post), n));
        const auto exact = mi_pair(eff.f_tilde(k - 1, k - 1), residual_mu(eff.f_tilde, k), {1.0});
        configs.push_back({eps, eta, depth, std::move(eff), exact});
      }

    auto agrees = [&](const Config& c, std::uint64_t seed, std::ostream& log) {
      const auto est = mc_mi_estimate(c.eff, {1.0}, k, samples, seed);
      const double zi = std::abs(est.i_est - c.exact.i_value) / est.std_err;
      const double zp = std::abs(est.i_prime_est - c.exact.i_prime_value) / est.std_err_prime;
      const bool ok = zi <= 3.0 && zp <= 3.0;
      if (!ok)
        log << " [eps=" << c.eps << " eta=" << c.eta << " depth=" << c.depth << " seed=" << seed << " z=" << zi
            << "," << zp << "]";
      return ok;
    };

    std::ostringstream outliers;
    std::vector<std::size_t> failed;
    for (std::size_t i = 0; i < configs.size(); ++i)
      if (!agrees(configs[i], 1000 + i, outliers)) failed.push_back(i);
    bool ok = failed.size() <= 1;
    if (failed.size() == 1) {
      const bool rerun = agrees(configs[failed[0]], 5000 + failed[0], outliers);
      outliers << " rerun " << (rerun ? "passed" : "failed");
      ok = rerun;
    }
    const double elapsed = seconds_since(start);
    d << configs.size() - failed.size() << "/" << configs.size() << " within 3 standard errors" << outliers.str()
      << " time=" << elapsed << "s";
    return ok && elapsed < 120.0;
  });

  // C5, C6 and C8 share the figure sweep.
  SweepRun first;
  double sweep_seconds = 0.0;
  const auto first_path = work_dir / "sweep_a.csv";
  try {
    const auto start = Clock::now();
    const auto config = figure_sweep(first_path);
    first.records = run_sweep(config);
    write_records(config, first.records);
    first.csv = read_file(first_path);
    sweep_seconds = seconds_since(start);
  } catch (const std::exception& e) {
    std::cout << "figure sweep failed: " << e.what() << '\n';
  }

  criterion("C5 depth ordering over the figure sweep", [&](std::ostream& d) {
    if (first.records.empty()) return false;
    const auto violations = check_ordering(first.records, 1e-6);
    d << first.records.size() << " records, " << violations.size() << " ordering violations";
    for (const auto& v : violations) d << " [eps=" << v.epsilon << " eta=" << v.eta << " " << v.detail << "]";
    d << " time=" << sweep_seconds << "s";
    return violations.empty() && first.records.size() == 21 * 3 * 3 && sweep_seconds < 1800.0;
  });

  criterion("C6 qualitative claims", [&](std::ostream& d) {
    if (first.records.empty()) return false;
    const auto at = index_records(first.records);
    auto i_of = [&](double eps, double eta, std::size_t depth) { return at.at({eps, eta, depth})->i_value; };
    int bad_a = 0, bad_b = 0;
    double min_margin_a = 1.0, min_margin_b = 1.0;
    for (double eps : default_epsilon_grid()) {
      if (eps >= 0.5) {
        const double gap_high = i_of(eps, 0.9, 2) - i_of(eps, 0.9, 0);
        const double gap_low = i_of(eps, 0.1, 2) - i_of(eps, 0.1, 0);
        min_margin_a = std::min(min_margin_a, gap_low - gap_high);
        bad_a += gap_high < gap_low ? 0 : 1;
      }
      const double gain3 = i_of(eps, 0.1, 3) - i_of(eps, 0.1, 2);
      const double gain2 = i_of(eps, 0.1, 2) - i_of(eps, 0.1, 0);
      min_margin_b = std::min(min_margin_b, gain2 - gain3);
      bad_b += gain3 <= gain2 ? 0 : 1;
    }
    d << "(a) failures=" << bad_a << " min margin=" << min_margin_a << "; (b) failures=" << bad_b
      << " min margin=" << min_margin_b;
    return bad_a == 0 && bad_b == 0;
  });

  criterion("C7 optimizer vs exhaustive grid", [](std::ostream& d) {
    double worst_refined = 0.0, worst_unrefined = 0.0;
    std::ostringstream divergent;
    int inconsistent = 0;
    for (double eps : {0.2, 0.5, 0.8})
      for (double eta : {0.2, 0.5, 0.8}) {
        const auto problem = make_problem(eps, eta, 1.0, 2);
        const auto grid = grid_oracle(problem, 64);
        const auto found = optimize(problem, {64, 2000, 1e-10});
        const auto coarse = optimize(problem, {64, 0, 1e-10});
        // Refinement may only improve on the best cell.
        worst_refined = std::max({worst_refined, grid.i_opt - found.i_opt, found.i_prime_opt - grid.i_prime_opt});
        worst_unrefined = std::max({worst_unrefined, std::abs(grid.i_opt - coarse.i_opt),
                                    std::abs(grid.i_prime_opt - coarse.i_prime_opt)});
        if (!found.joint_consistent) {
          ++inconsistent;
          divergent << " [eps=" << eps << " eta=" << eta << " I'(argmax I)=" << found.i_prime_at_angles
                    << " min I'=" << found.i_prime_opt << " I(argmin I')=" << found.i_at_min_i_prime << "]";
        }
      }
    d << "refined shortfall=" << worst_refined << " grid-only mismatch=" << worst_unrefined
      << " joint inconsistent at " << inconsistent << "/9" << divergent.str();
    return worst_refined <= 1e-6 && worst_unrefined <= 1e-6;
  });

  criterion("C8 deterministic sweep output", [&](std::ostream& d) {
    if (first.csv.empty()) return false;
    const auto second_path = work_dir / "sweep_b.csv";
    auto config = figure_sweep(second_path);
    config.threads = worker_count(0) > 1 ? 1 : 2;  // vary the worker count as well
    write_records(config, run_sweep(config));
    const std::string second = read_file(second_path);
    d << first.csv.size() << " bytes, " << (second == first.csv ? "identical" : "different");
    return second == first.csv;
  });

  std::cout << (failures == 0 ? "all acceptance criteria passed" : "some acceptance criteria failed") << '\n';
  return failures == 0 ? 0 : 1;
}
