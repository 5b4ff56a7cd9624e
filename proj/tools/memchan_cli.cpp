// memchan: command-line front end for the memory-channel toolkit.
//
// Exit codes: 0 success, 2 usage or parameter error, 3 numeric or
// validation failure.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "memchan/channel_model.hpp"
#include "memchan/errors.hpp"
#include "memchan/mutual_info.hpp"
#include "memchan/optimizer.hpp"
#include "memchan/sweep.hpp"
#include "memchan/unravel.hpp"

namespace {

using namespace memchan;
using json = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

// Raised for checks that fail in --strict mode.
struct ValidationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Output sink chosen by --out; stdout when empty or "-".
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.open(path, std::ios::binary);
      if (!file_) throw ParameterError("cannot open output file: " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(std::stod(format_number(m(i, j))));
    rows.push_back(row);
  }
  return rows;
}

json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(std::stod(format_number(v(i))));
  return out;
}

void csv_matrix(std::ostream& os, const char* name, const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      os << name << ',' << i + 1 << ',' << j + 1 << ',' << format_number(m(i, j)) << '\n';
}

void csv_vector(std::ostream& os, const char* name, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) os << name << ',' << i + 1 << ",1," << format_number(v(i)) << '\n';
}

// ---------------------------------------------------------------- coupling

struct CouplingOptions {
  double epsilon = 0.0;
  double eta = 0.0;
  std::size_t n = 0;
  bool unravel = false;
  std::string format = "csv";
  std::string out;
};

int run_coupling(const CouplingOptions& o) {
  const auto c = build_coupling({o.epsilon, o.eta, o.n});
  std::optional<UnravelResult> u;
  if (o.unravel) u = svd_unravel(c.f);

  Sink sink(o.out);
  auto& os = sink.stream();
  if (o.format == "json") {
    json doc{{"epsilon", o.epsilon}, {"eta", o.eta}, {"n", o.n},
             {"f", matrix_json(c.f)}, {"g", matrix_json(c.g)}, {"t", vector_json(c.t)}};
    if (u) {
      doc["u"] = matrix_json(u->u_matrix);
      doc["v"] = matrix_json(u->v_matrix);
      doc["eta_eff"] = vector_json(u->eta_eff);
    }
    os << doc.dump(2) << '\n';
  } else {
    os << "matrix,row,col,value\n";
    csv_matrix(os, "f", c.f);
    csv_matrix(os, "g", c.g);
    csv_vector(os, "t", c.t);
    if (u) {
      csv_matrix(os, "u", u->u_matrix);
      csv_matrix(os, "v", u->v_matrix);
      csv_vector(os, "eta_eff", u->eta_eff);
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------------- mi

struct MiOptions {
  double epsilon = 0.0;
  double eta = 0.0;
  double photons = 1.0;
  std::size_t n = 0;  // 0: convergence policy
  std::size_t depth = 0;
  std::vector<double> angles;
  bool full_unravel = false;
  bool validate = false;
  std::size_t samples = 1'000'000;
  std::uint64_t seed = 0;
  bool strict = false;
  std::string format = "text";
  std::string out;
};

int run_mi(const MiOptions& o) {
  const SourceParams source{o.photons};
  source.validate();
  const std::size_t n = o.n ? o.n : limit_chain_length(o.epsilon, o.eta);
  const auto c = build_coupling({o.epsilon, o.eta, n});

  EffectiveCoupling eff;
  std::size_t edge = 1;
  std::vector<double> pre_angles, post_angles;
  if (o.full_unravel) {
    if (o.depth != 0 || !o.angles.empty()) throw ParameterError("--full-unravel excludes --depth/--angles");
    const auto u = svd_unravel(c.f);
    eff = effective_coupling(c, u.u_matrix, u.v_matrix);
  } else {
    const std::size_t per_side = o.depth == 0 ? 0 : angle_count(o.depth);
    if (o.depth == 1) throw ParameterError("--depth must be 0, 2 or 3");
    std::vector<double> angles = o.angles;
    if (angles.empty()) angles.assign(2 * per_side, 0.0);
    if (angles.size() != 2 * per_side) {
      std::ostringstream msg;
      msg << "--angles needs " << 2 * per_side << " values (pre then post) for depth " << o.depth;
      throw ParameterError(msg.str());
    }
    pre_angles.assign(angles.begin(), angles.begin() + static_cast<std::ptrdiff_t>(per_side));
    post_angles.assign(angles.begin() + static_cast<std::ptrdiff_t>(per_side), angles.end());
    const StaircaseNetwork pre(block_from_angles(pre_angles), n);
    const StaircaseNetwork post(block_from_angles(post_angles), n);
    eff = effective_coupling(c, pre, post);
    edge = std::max<std::size_t>(1, o.depth);
  }

  const auto prof = mi_profile(eff, source, edge);
  const auto& at = prof.reports[prof.limit_index - 1];
  double i_prime = prof.limit_i_prime;
  if (o.full_unravel)
    for (const auto& r : prof.reports) i_prime = std::max(i_prime, r.i_prime_value);

  std::optional<MCEstimate> mc;
  bool mc_ok = true;
  if (o.validate) {
    mc = mc_mi_estimate(eff, source, prof.limit_index, o.samples, o.seed);
    mc_ok = std::abs(mc->i_est - at.i_value) <= 3 * mc->std_err &&
            std::abs(mc->i_prime_est - at.i_prime_value) <= 3 * mc->std_err_prime;
  }

  Sink sink(o.out);
  auto& os = sink.stream();
  if (o.format == "csv") {
    SweepRecord r;
    r.epsilon = o.epsilon;
    r.eta = o.eta;
    r.mean_photons = o.photons;
    r.depth = o.full_unravel ? 0 : o.depth;
    r.angles_pre = pre_angles;
    r.angles_post = post_angles;
    r.i_value = prof.limit_i;
    r.i_prime_value = i_prime;
    r.evaluations = 1;
    os << to_csv({r});
  } else if (o.format == "json") {
    json doc{{"epsilon", o.epsilon}, {"eta", o.eta}, {"N", o.photons}, {"n", n},
             {"k", prof.limit_index}, {"I", prof.limit_i}, {"I_prime", i_prime}, {"mu", at.mu},
             {"converged", prof.converged}, {"converged_from", prof.converged_from}};
    if (mc) {
      doc["mc"] = {{"I", mc->i_est}, {"I_prime", mc->i_prime_est}, {"std_err", mc->std_err},
                   {"std_err_prime", mc->std_err_prime}, {"samples", mc->samples}, {"seed", o.seed},
                   {"within_3sigma", mc_ok}};
    }
    os << doc.dump(2) << '\n';
  } else {
    os << "n               " << n << '\n'
       << "k               " << prof.limit_index << '\n'
       << "I               " << format_number(prof.limit_i) << '\n'
       << "I_prime         " << format_number(i_prime) << '\n'
       << "mu              " << format_number(at.mu) << '\n'
       << "converged       " << (prof.converged ? "true" : "false") << '\n'
       << "converged_from  " << prof.converged_from << '\n';
    if (mc) {
      os << "mc_I            " << format_number(mc->i_est) << " +- " << format_number(mc->std_err) << '\n'
         << "mc_I_prime      " << format_number(mc->i_prime_est) << " +- " << format_number(mc->std_err_prime)
         << '\n'
         << "mc_within_3sig  " << (mc_ok ? "true" : "false") << '\n';
    }
  }
  if (o.strict && !mc_ok) throw ValidationFailure("Monte-Carlo estimate outside 3 standard errors");
  return kExitOk;
}

// ---------------------------------------------------------------- optimize

struct OptimizeOptions {
  double epsilon = 0.0;
  double eta = 0.0;
  double photons = 1.0;
  std::size_t depth = 2;
  std::size_t n = 0;
  std::size_t grid = 0;
  std::string format = "text";
  std::string out;
};

int run_optimize(const OptimizeOptions& o) {
  auto problem = make_problem(o.epsilon, o.eta, o.photons, o.depth);
  if (o.n) problem.channel.n_uses = o.n;
  SearchConfig config;
  config.grid_resolution = o.grid;
  const auto r = optimize(problem, config);

  Sink sink(o.out);
  auto& os = sink.stream();
  if (o.format == "json") {
    json doc{{"epsilon", o.epsilon}, {"eta", o.eta}, {"N", o.photons}, {"depth", o.depth},
             {"n", problem.channel.n_uses}, {"k", r.row},
             {"angles_pre", r.angles_pre}, {"angles_post", r.angles_post},
             {"I", r.i_opt}, {"I_prime_at_angles", r.i_prime_at_angles}, {"I_prime_min", r.i_prime_opt},
             {"angles_pre_min_I_prime", r.angles_pre_min_i_prime},
             {"angles_post_min_I_prime", r.angles_post_min_i_prime},
             {"joint_consistent", r.joint_consistent}, {"refinement_converged", r.refinement_converged},
             {"baseline_I", r.baseline_i}, {"baseline_I_prime", r.baseline_i_prime},
             {"evals", r.evaluations}};
    os << doc.dump(2) << '\n';
  } else {
    os << "n                     " << problem.channel.n_uses << '\n'
       << "angles_pre            " << format_angles(r.angles_pre) << '\n'
       << "angles_post           " << format_angles(r.angles_post) << '\n'
       << "I                     " << format_number(r.i_opt) << '\n'
       << "I_prime_at_angles     " << format_number(r.i_prime_at_angles) << '\n'
       << "I_prime_min           " << format_number(r.i_prime_opt) << '\n'
       << "angles_min_I_prime    " << format_angles(r.angles_pre_min_i_prime) << " | "
       << format_angles(r.angles_post_min_i_prime) << '\n'
       << "joint_consistent      " << (r.joint_consistent ? "true" : "false") << '\n'
       << "refinement_converged  " << (r.refinement_converged ? "true" : "false") << '\n'
       << "baseline_I            " << format_number(r.baseline_i) << '\n'
       << "baseline_I_prime      " << format_number(r.baseline_i_prime) << '\n'
       << "evals                 " << r.evaluations << '\n';
  }
  return kExitOk;
}

// ------------------------------------------------------------------- sweep

struct SweepOptions {
  std::vector<double> epsilon;
  std::vector<double> eta{0.1, 0.5, 0.9};
  double photons = 1.0;
  std::vector<std::size_t> depths{0, 2, 3};
  std::string format = "csv";
  std::string out;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  bool strict = false;
};

int run_sweep_command(const SweepOptions& o) {
  SweepConfig config;
  config.epsilon_grid = o.epsilon.empty() ? default_epsilon_grid() : o.epsilon;
  config.eta_list = o.eta;
  config.mean_photons = o.photons;
  config.depths = o.depths;
  config.output_path = o.out;
  config.output_format = o.format == "json" ? OutputFormat::json : OutputFormat::csv;
  config.seed = o.seed;
  config.threads = o.threads;
  config.validate();
  if (!o.out.empty() && o.out != "-") Sink probe(o.out);  // fail before the long run

  const auto records = run_sweep(config);
  try {
    write_records(config, records);
  } catch (const std::runtime_error& e) {
    throw ParameterError(e.what());
  }
  const auto violations = check_ordering(records);
  for (const auto& v : violations)
    std::cerr << "ordering violation at epsilon=" << format_number(v.epsilon) << " eta=" << format_number(v.eta)
              << ": " << v.detail << '\n';
  if (o.strict && !violations.empty()) throw ValidationFailure("depth ordering violated");
  return kExitOk;
}

// ---------------------------------------------------------------- validate

struct ValidateOptions {
  std::size_t samples = 200'000;
  std::uint64_t seed = 1;
};

int run_validate(const ValidateOptions& o) {
  int failures = 0;
  auto check = [&](const std::string& name, const std::function<bool(std::ostream&)>& body) {
    std::ostringstream detail;
    bool ok = false;
    try {
      ok = body(detail);
    } catch (const std::exception& e) {
      detail << "exception: " << e.what();
    }
    std::cout << (ok ? "PASS " : "FAIL ") << name << "  " << detail.str() << '\n';
    failures += ok ? 0 : 1;
  };

  check("coupling closed form vs iteration, row isometry", [](std::ostream& d) {
    double worst_match = 0.0, worst_iso = 0.0;
    for (int i = 0; i <= 10; ++i)
      for (int j = 0; j <= 10; ++j)
        for (std::size_t n : {1, 2, 8, 32}) {
          const ChannelParams p{i / 10.0, j / 10.0, n};
          const auto a = build_coupling(p);
          const auto b = step_oracle(p);
          worst_match = std::max({worst_match, (a.f - b.f).cwiseAbs().maxCoeff(),
                                  (a.g - b.g).cwiseAbs().maxCoeff(), (a.t - b.t).cwiseAbs().maxCoeff()});
          worst_iso = std::max(worst_iso, row_isometry_defect(a));
        }
    d << "match=" << worst_match << " isometry=" << worst_iso;
    return worst_match <= 1e-12 && worst_iso <= 1e-12;
  });

  check("full unraveling removes cross-talk", [](std::ostream& d) {
    double worst = 0.0;
    for (double eps : {0.25, 0.75})
      for (double eta : {0.25, 0.75}) {
        const auto c = build_coupling({eps, eta, 32});
        const auto u = svd_unravel(c.f);
        const auto e = effective_coupling(c, u.u_matrix, u.v_matrix);
        Eigen::MatrixXd off = e.f_tilde;
        off.diagonal().setZero();
        worst = std::max(worst, off.cwiseAbs().maxCoeff());
      }
    d << "max off-diagonal=" << worst;
    return worst <= 1e-10;
  });

  check("memoryless anchor", [](std::ostream& d) {
    double worst = 0.0;
    for (double n : {0.5, 1.0, 4.0})
      for (double eta : {0.1, 0.5, 0.9}) {
        const auto c = build_coupling({0.0, eta, 8});
        const auto m = mi_pair(c.f(3, 3), residual_mu(c.f, 4), {n});
        worst = std::max({worst, std::abs(m.i_value - 0.5 * std::log2(1 + n * eta)), m.i_prime_value});
      }
    d << "max error=" << worst;
    return worst <= 1e-12;
  });

  check("Monte-Carlo agreement", [&](std::ostream& d) {
    int passed = 0, total = 0;
    for (double eps : {0.3, 0.8})
      for (double eta : {0.2, 0.7}) {
        const auto c = build_coupling({eps, eta, 24});
        const auto eff = effective_coupling(c, staircase(rotation2(0.5), 24), staircase(rotation2(-0.3), 24));
        const auto exact = mi_pair(eff.f_tilde(11, 11), residual_mu(eff.f_tilde, 12), {1.0});
        const auto est = mc_mi_estimate(eff, {1.0}, 12, o.samples, o.seed + static_cast<std::uint64_t>(total));
        ++total;
        passed += std::abs(est.i_est - exact.i_value) <= 3 * est.std_err &&
                  std::abs(est.i_prime_est - exact.i_prime_value) <= 3 * est.std_err_prime;
      }
    d << passed << "/" << total << " within 3 sigma";
    return passed + 1 >= total;
  });

  check("optimizer vs exhaustive grid", [](std::ostream& d) {
    auto problem = make_problem(0.6, 0.5, 1.0, 2);
    problem.channel.n_uses = 40;
    const auto oracle = grid_oracle(problem, 16);
    const auto found = optimize(problem, SearchConfig{16, 2000, 1e-10});
    d << "optimize I=" << found.i_opt << " grid I=" << oracle.i_opt;
    return found.i_opt >= oracle.i_opt - 1e-6 && found.i_opt >= found.baseline_i - 1e-9;
  });

  std::cout << (failures == 0 ? "all checks passed" : "some checks failed") << '\n';
  return failures == 0 ? kExitOk : kExitNumeric;
}

void add_format(CLI::App* cmd, std::string& target, std::vector<std::string> choices) {
  cmd->add_option("--format", target, "Output format")->check(CLI::IsMember(std::move(choices)));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lossy bosonic memory channel: coupling, mutual information and staircase optimization"};
  app.require_subcommand(1);

  CouplingOptions co;
  auto* coupling = app.add_subcommand("coupling", "Dump the coupling matrices f, g, t");
  coupling->add_option("--epsilon", co.epsilon, "Memory transmissivity in [0,1]")->required();
  coupling->add_option("--eta", co.eta, "Channel transmissivity in [0,1]")->required();
  coupling->add_option("--n", co.n, "Number of channel uses")->required();
  coupling->add_flag("--unravel", co.unravel, "Also dump U, V and the effective transmissivities");
  add_format(coupling, co.format, {"csv", "json"});
  coupling->add_option("--out", co.out, "Output file (default stdout)");

  MiOptions mo;
  auto* mi = app.add_subcommand("mi", "Mutual informations I, I' at mid-chain");
  mi->add_option("--epsilon", mo.epsilon, "Memory transmissivity in [0,1]")->required();
  mi->add_option("--eta", mo.eta, "Channel transmissivity in [0,1]")->required();
  mi->add_option("--photons", mo.photons, "Mean photon number N > 0");
  mi->add_option("--n", mo.n, "Chain length (default: convergence policy)");
  mi->add_option("--depth", mo.depth, "Staircase depth 0, 2 or 3");
  mi->add_option("--angles", mo.angles, "Pre angles then post angles, comma separated")->delimiter(',');
  mi->add_flag("--full-unravel", mo.full_unravel, "Use the SVD unitaries as pre/post-processing");
  mi->add_flag("--validate", mo.validate, "Cross-check against a Monte-Carlo estimate");
  mi->add_option("--samples", mo.samples, "Monte-Carlo samples");
  mi->add_option("--seed", mo.seed, "Monte-Carlo seed");
  mi->add_flag("--strict", mo.strict, "Exit 3 when validation fails");
  add_format(mi, mo.format, {"text", "csv", "json"});
  mi->add_option("--out", mo.out, "Output file (default stdout)");

  OptimizeOptions oo;
  auto* opt = app.add_subcommand("optimize", "Optimize depth-2 or depth-3 staircase processing");
  opt->add_option("--epsilon", oo.epsilon, "Memory transmissivity in [0,1]")->required();
  opt->add_option("--eta", oo.eta, "Channel transmissivity in [0,1]")->required();
  opt->add_option("--photons", oo.photons, "Mean photon number N > 0");
  opt->add_option("--depth", oo.depth, "Staircase depth 2 or 3");
  opt->add_option("--n", oo.n, "Chain length (default: convergence policy)");
  opt->add_option("--grid", oo.grid, "Grid points per angle (default 64 or 12)");
  add_format(opt, oo.format, {"text", "json"});
  opt->add_option("--out", oo.out, "Output file (default stdout)");

  SweepOptions so;
  auto* sweep = app.add_subcommand("sweep", "Baseline and optimized I, I' over an (epsilon, eta) grid");
  sweep->add_option("--epsilon", so.epsilon, "Epsilon values (default 0:0.05:1)")->delimiter(',');
  sweep->add_option("--eta", so.eta, "Eta values")->delimiter(',');
  sweep->add_option("--photons", so.photons, "Mean photon number N > 0");
  sweep->add_option("--depth", so.depths, "Depths from {0,2,3}")->delimiter(',');
  add_format(sweep, so.format, {"csv", "json"});
  sweep->add_option("--out", so.out, "Output file (default stdout)");
  sweep->add_option("--seed", so.seed, "Seed (recorded; results are deterministic)");
  sweep->add_option("--threads", so.threads, "Worker threads (default MEMCHAN_THREADS or all cores)");
  sweep->add_flag("--strict", so.strict, "Exit 3 when the depth ordering is violated");

  ValidateOptions vo;
  auto* validate = app.add_subcommand("validate", "Run the built-in oracle and property checks");
  validate->add_option("--samples", vo.samples, "Monte-Carlo samples per configuration");
  validate->add_option("--seed", vo.seed, "Monte-Carlo seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*coupling) return run_coupling(co);
    if (*mi) return run_mi(mo);
    if (*opt) return run_optimize(oo);
    if (*sweep) return run_sweep_command(so);
    if (*validate) return run_validate(vo);
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DimensionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumeric;
  }
  return kExitUsage;
}
