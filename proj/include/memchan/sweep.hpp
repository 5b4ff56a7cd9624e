#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace memchan {

enum class OutputFormat { csv, json };

/// Depth 0 denotes the unprocessed baseline; 2 and 3 are optimized staircases.
struct SweepConfig {
  std::vector<double> epsilon_grid;
  std::vector<double> eta_list;
  double mean_photons = 1.0;
  std::vector<std::size_t> depths{0, 2, 3};
  std::string output_path;
  OutputFormat output_format = OutputFormat::csv;
  std::uint64_t seed = 0;
  std::size_t threads = 0;  // 0: MEMCHAN_THREADS or hardware concurrency

  void validate() const;
};

struct SweepRecord {
  double epsilon = 0.0;
  double eta = 0.0;
  double mean_photons = 0.0;
  std::size_t depth = 0;
  std::vector<double> angles_pre;
  std::vector<double> angles_post;
  double i_value = 0.0;
  double i_prime_value = 0.0;  // minimized I' (baseline I' for depth 0)
  bool joint_consistent = true;
  std::size_t evaluations = 0;
};

struct OrderingViolation {
  double epsilon = 0.0;
  double eta = 0.0;
  std::string detail;
};

inline constexpr char kCsvHeader[] = "epsilon,eta,N,depth,angles_pre,angles_post,I,I_prime,joint_consistent,evals";

/// 0, 0.05, ..., 1.
[[nodiscard]] std::vector<double> default_epsilon_grid();

/// Worker count: the request if non-zero, else MEMCHAN_THREADS, else hardware concurrency.
[[nodiscard]] std::size_t worker_count(std::size_t requested);

/// One record for a single (epsilon, eta, depth) point.
[[nodiscard]] SweepRecord evaluate_point(double epsilon, double eta, double mean_photons, std::size_t depth);

/// Records in grid order: epsilon outermost, then eta, then depth as listed.
[[nodiscard]] std::vector<SweepRecord> run_sweep(const SweepConfig& config);

/// Every I(3) >= I(2) >= I(0) and I'(3) <= I'(2) <= I'(0) breach beyond `tolerance`.
[[nodiscard]] std::vector<OrderingViolation> check_ordering(const std::vector<SweepRecord>& records,
                                                            double tolerance = 1e-6);

/// %.12g
[[nodiscard]] std::string format_number(double x);
[[nodiscard]] std::string format_angles(const std::vector<double>& angles);

[[nodiscard]] std::string to_csv(const std::vector<SweepRecord>& records);
[[nodiscard]] std::string to_json(const std::vector<SweepRecord>& records);

/// Writes to config.output_path, or stdout when the path is empty or "-".
/// Throws std::runtime_error if the file cannot be written.
void write_records(const SweepConfig& config, const std::vector<SweepRecord>& records);

}  // namespace memchan
