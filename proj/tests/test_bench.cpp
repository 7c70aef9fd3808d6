#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>

#include "cocoa/bench.hpp"
#include "cocoa/errors.hpp"
#include "cocoa/losses.hpp"

using namespace cocoa;
namespace fs = std::filesystem;

TEST_CASE("run_bench covers the grid with exact counts") {
  BenchReport report = run_bench({2, 3}, {8, 16}, 8, 2);
  REQUIRE(report.rows.size() == 8);  // 4 cells x 2 methods
  for (const BenchRow& r : report.rows) {
    CHECK(r.measured_count == r.formula_count);
    CHECK(r.wall_seconds >= 0.0);
    auto method = r.method == "cocoa" ? CountMethod::cocoa : CountMethod::cmc;
    CHECK(r.formula_count == count_formula(method, r.num_modalities, r.batch_size));
  }
}

TEST_CASE("cmc/cocoa ratio grows in N and V") {
  // The unique-count ratio is (V-1)N / (V+N-2): strictly increasing in V
  // everywhere and in N for V >= 3; V=2 is the break-even row (ratio 1).
  std::vector<std::uint64_t> vs{2, 3, 4, 6};
  std::vector<std::uint64_t> ns{8, 32, 128, 512};
  for (auto v : vs) {
    double prev = 0.0;
    for (auto n : ns) {
      double ratio = static_cast<double>(count_formula(CountMethod::cmc, v, n)) /
                     static_cast<double>(count_formula(CountMethod::cocoa, v, n));
      if (v == 2)
        CHECK(ratio == 1.0);
      else
        CHECK(ratio > prev);
      prev = ratio;
    }
  }
  for (auto n : ns) {
    double prev = 0.0;
    for (auto v : vs) {
      double ratio = static_cast<double>(count_formula(CountMethod::cmc, v, n)) /
                     static_cast<double>(count_formula(CountMethod::cocoa, v, n));
      CHECK(ratio > prev);
      prev = ratio;
    }
  }
}

TEST_CASE("bench validates its grid") {
  CHECK_THROWS_AS(run_bench({}, {8}, 8, 1), config_error);
  CHECK_THROWS_AS(run_bench({1}, {8}, 8, 1), config_error);
  CHECK_THROWS_AS(run_bench({2}, {1}, 8, 1), config_error);
  CHECK_THROWS_AS(run_bench({2}, {8}, 0, 1), config_error);
}

TEST_CASE("report file is a parsable table") {
  BenchReport report = run_bench({2}, {8}, 4, 1);
  fs::path path = fs::temp_directory_path() / "cocoa_bench_test.tsv";
  write_bench_report(report, path);

  std::ifstream is(path);
  std::string header;
  std::getline(is, header);
  CHECK(header == "method\tV\tN\tmeasured_count\tformula_count\twall_seconds");
  std::size_t rows = 0;
  std::string line;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == report.rows.size());
  fs::remove(path);
}
