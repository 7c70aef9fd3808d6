#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cocoa {

struct BenchRow {
  std::string method;  // "cocoa" or "cmc"
  std::uint64_t num_modalities = 0;
  std::uint64_t batch_size = 0;
  std::uint64_t measured_count = 0;
  std::uint64_t formula_count = 0;
  double wall_seconds = 0.0;  // median over repeats
};

struct BenchReport {
  std::vector<BenchRow> rows;
};

/// Evaluates cocoa_loss and cmc_loss on random embeddings over the (V, N)
/// grid, checking the instrumented similarity-evaluation counter against the
/// closed-form count for every cell. Single-threaded; wall time is the median
/// over `repeats` evaluations.
BenchReport run_bench(const std::vector<std::uint64_t>& modality_counts,
                      const std::vector<std::uint64_t>& batch_sizes, std::size_t dim,
                      std::size_t repeats, std::uint64_t seed = 0);

/// Tab-separated table with a header row.
void write_bench_report(const BenchReport& report, const std::filesystem::path& path);

}  // namespace cocoa
