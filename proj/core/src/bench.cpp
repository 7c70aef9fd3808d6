#include "cocoa/bench.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>

#include "cocoa/errors.hpp"
#include "cocoa/losses.hpp"
#include "cocoa/rng.hpp"

namespace cocoa {
namespace {

EmbeddingSet random_embeddings(std::uint64_t v, std::uint64_t n, std::size_t d,
                               std::mt19937_64& rng) {
  EmbeddingSet z;
  for (std::uint64_t m = 0; m < v; ++m) {
    Tensor t = Tensor::zeros({static_cast<std::size_t>(n), d});
    for (double& x : t.data()) x = gaussian(rng, 0.0, 1.0);
    z.push_back(std::move(t));
  }
  return z;
}

BenchRow bench_cell(CountMethod method, const EmbeddingSet& z, std::uint64_t v,
                    std::uint64_t n, std::size_t repeats) {
  std::vector<double> times;
  std::uint64_t measured = 0;
  for (std::size_t r = 0; r < repeats; ++r) {
    OpCounter counter;
    auto start = std::chrono::steady_clock::now();
    if (method == CountMethod::cocoa)
      cocoa_loss(z, {}, &counter);
    else
      cmc_loss(z, 0.1, &counter);
    times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                        .count());
    measured = counter.similarity_evaluations;
  }
  std::sort(times.begin(), times.end());
  BenchRow row;
  row.method = method == CountMethod::cocoa ? "cocoa" : "cmc";
  row.num_modalities = v;
  row.batch_size = n;
  row.measured_count = measured;
  row.formula_count = count_formula(method, v, n);
  row.wall_seconds = times[times.size() / 2];
  if (row.measured_count != row.formula_count)
    throw numeric_error("bench: count mismatch for " + row.method + " V=" +
                        std::to_string(v) + " N=" + std::to_string(n) + " (measured " +
                        std::to_string(row.measured_count) + ", formula " +
                        std::to_string(row.formula_count) + ")");
  return row;
}

}  // namespace

BenchReport run_bench(const std::vector<std::uint64_t>& modality_counts,
                      const std::vector<std::uint64_t>& batch_sizes, std::size_t dim,
                      std::size_t repeats, std::uint64_t seed) {
  if (modality_counts.empty() || batch_sizes.empty())
    throw config_error("bench: empty grid");
  for (std::uint64_t v : modality_counts)
    if (v < 2) throw config_error("bench: V must be >= 2");
  for (std::uint64_t n : batch_sizes)
    if (n < 2) throw config_error("bench: N must be >= 2");
  if (dim == 0 || repeats == 0) throw config_error("bench: dim and repeats must be >= 1");

  auto rng = make_rng(seed, 17);
  BenchReport report;
  for (std::uint64_t v : modality_counts)
    for (std::uint64_t n : batch_sizes) {
      EmbeddingSet z = random_embeddings(v, n, dim, rng);
      report.rows.push_back(bench_cell(CountMethod::cocoa, z, v, n, repeats));
      report.rows.push_back(bench_cell(CountMethod::cmc, z, v, n, repeats));
    }
  return report;
}

void write_bench_report(const BenchReport& report, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw io_error("bench: cannot open " + path.string());
  os << "method\tV\tN\tmeasured_count\tformula_count\twall_seconds\n";
  for (const BenchRow& r : report.rows)
    os << r.method << '\t' << r.num_modalities << '\t' << r.batch_size << '\t'
       << r.measured_count << '\t' << r.formula_count << '\t' << r.wall_seconds << '\n';
  if (!os) throw io_error("bench: write failed for " + path.string());
}

}  // namespace cocoa
