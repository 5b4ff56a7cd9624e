#include "memchan/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "memchan/errors.hpp"
#include "memchan/mutual_info.hpp"
#include "memchan/optimizer.hpp"

namespace memchan {

namespace {

double rounded(double x) { return std::stod(format_number(x)); }

std::vector<double> rounded(const std::vector<double>& xs) {
  std::vector<double> out;
  out.reserve(xs.size());
  for (double x : xs) out.push_back(rounded(x));
  return out;
}

}  // namespace

void SweepConfig::validate() const {
  if (epsilon_grid.empty() || eta_list.empty()) throw ParameterError("sweep grids must be non-empty");
  if (depths.empty()) throw ParameterError("sweep needs at least one depth");
  for (double e : epsilon_grid) ChannelParams{e, 0.5, 1}.validate();
  for (double e : eta_list) ChannelParams{0.5, e, 1}.validate();
  SourceParams{mean_photons}.validate();
  for (auto d : depths)
    if (d != 0 && d != 2 && d != 3) throw ParameterError("sweep depths must be drawn from {0, 2, 3}");
}

std::vector<double> default_epsilon_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back(static_cast<double>(i) / 20.0);
  return grid;
}

std::size_t worker_count(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("MEMCHAN_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1U, std::thread::hardware_concurrency());
}

SweepRecord evaluate_point(double epsilon, double eta, double mean_photons, std::size_t depth) {
  SweepRecord r;
  r.epsilon = epsilon;
  r.eta = eta;
  r.mean_photons = mean_photons;
  r.depth = depth;
  if (depth == 0) {
    const auto problem = make_problem(epsilon, eta, mean_photons, 2);
    const auto mi = baseline_mi(problem);
    r.i_value = mi.i_value;
    r.i_prime_value = mi.i_prime_value;
    r.evaluations = 1;
    return r;
  }
  const auto result = optimize(make_problem(epsilon, eta, mean_photons, depth, Objective::joint));
  r.angles_pre = result.angles_pre;
  r.angles_post = result.angles_post;
  r.i_value = result.i_opt;
  r.i_prime_value = result.i_prime_opt;
  r.joint_consistent = result.joint_consistent;
  r.evaluations = result.evaluations;
  return r;
}

std::vector<SweepRecord> run_sweep(const SweepConfig& config) {
  config.validate();
  struct Task {
    double epsilon, eta;
    std::size_t depth;
  };
  std::vector<Task> tasks;
  for (double e : config.epsilon_grid)
    for (double h : config.eta_list)
      for (auto d : config.depths) tasks.push_back({e, h, d});

  std::vector<SweepRecord> records(tasks.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        records[i] = evaluate_point(tasks[i].epsilon, tasks[i].eta, config.mean_photons, tasks[i].depth);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };

  const std::size_t workers = std::min(worker_count(config.threads), tasks.size());
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return records;
}

std::vector<OrderingViolation> check_ordering(const std::vector<SweepRecord>& records, double tolerance) {
  std::map<std::tuple<double, double>, std::map<std::size_t, const SweepRecord*>> by_point;
  for (const auto& r : records) by_point[{r.epsilon, r.eta}][r.depth] = &r;

  std::vector<OrderingViolation> out;
  for (const auto& [point, depths] : by_point) {
    const auto [eps, eta] = point;
    auto compare = [&](std::size_t deeper, std::size_t shallower) {
      const auto hi = depths.find(deeper);
      const auto lo = depths.find(shallower);
      if (hi == depths.end() || lo == depths.end()) return;
      std::ostringstream msg;
      if (hi->second->i_value < lo->second->i_value - tolerance) {
        msg << "I(depth " << deeper << ")=" << format_number(hi->second->i_value) << " < I(depth " << shallower
            << ")=" << format_number(lo->second->i_value);
        out.push_back({eps, eta, msg.str()});
      }
      if (hi->second->i_prime_value > lo->second->i_prime_value + tolerance) {
        std::ostringstream m2;
        m2 << "I'(depth " << deeper << ")=" << format_number(hi->second->i_prime_value) << " > I'(depth "
           << shallower << ")=" << format_number(lo->second->i_prime_value);
        out.push_back({eps, eta, m2.str()});
      }
    };
    compare(3, 2);
    compare(2, 0);
    if (depths.find(2) == depths.end()) compare(3, 0);
  }
  return out;
}

std::string format_number(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x == 0.0 ? 0.0 : x);  // no "-0"
  return buf;
}

std::string format_angles(const std::vector<double>& angles) {
  std::string out;
  for (std::size_t i = 0; i < angles.size(); ++i) {
    if (i) out += ';';
    out += format_number(angles[i]);
  }
  return out;
}

std::string to_csv(const std::vector<SweepRecord>& records) {
  std::ostringstream os;
  os << kCsvHeader << '\n';
  for (const auto& r : records) {
    os << format_number(r.epsilon) << ',' << format_number(r.eta) << ',' << format_number(r.mean_photons) << ','
       << r.depth << ',' << format_angles(r.angles_pre) << ',' << format_angles(r.angles_post) << ','
       << format_number(r.i_value) << ',' << format_number(r.i_prime_value) << ','
       << (r.joint_consistent ? "true" : "false") << ',' << r.evaluations << '\n';
  }
  return os.str();
}

std::string to_json(const std::vector<SweepRecord>& records) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& r : records) {
    rows.push_back({{"epsilon", rounded(r.epsilon)},
                    {"eta", rounded(r.eta)},
                    {"N", rounded(r.mean_photons)},
                    {"depth", r.depth},
                    {"angles_pre", rounded(r.angles_pre)},
                    {"angles_post", rounded(r.angles_post)},
                    {"I", rounded(r.i_value)},
                    {"I_prime", rounded(r.i_prime_value)},
                    {"joint_consistent", r.joint_consistent},
                    {"evals", r.evaluations}});
  }
  return nlohmann::ordered_json{{"records", rows}}.dump(2) + "\n";
}

void write_records(const SweepConfig& config, const std::vector<SweepRecord>& records) {
  const std::string text = config.output_format == OutputFormat::csv ? to_csv(records) : to_json(records);
  if (config.output_path.empty() || config.output_path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(config.output_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + config.output_path);
  out << text;
  if (!out.flush()) throw std::runtime_error("failed writing output file: " + config.output_path);
}

}  // namespace memchan
