#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#ifndef COCOA_CLI_PATH
#error "COCOA_CLI_PATH must point at the built binary"
#endif

namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir(const char* name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int run_cli(const std::string& args, const fs::path& out) {
  std::string cmd = std::string(COCOA_CLI_PATH) + " " + args + " > " + out.string() + " 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("synth is deterministic across invocations") {
  TempDir dir("cocoa_cli_synth");
  auto log1 = dir.path / "a.log", log2 = dir.path / "b.log";
  REQUIRE(run_cli("synth --out " + (dir.path / "d1").string() +
                      " --seed 7 --windows-per-class 5",
                  log1) == 0);
  REQUIRE(run_cli("synth --out " + (dir.path / "d2").string() +
                      " --seed 7 --windows-per-class 5",
                  log2) == 0);
  std::string h1 = slurp(log1), h2 = slurp(log2);
  auto hash_line = [](const std::string& s) {
    auto pos = s.find("hash:");
    return s.substr(pos, s.find('\n', pos) - pos);
  };
  CHECK(hash_line(h1) == hash_line(h2));
}

TEST_CASE("pretrain and probe produce the promised artifacts") {
  TempDir dir("cocoa_cli_train");
  auto log = dir.path / "log";
  auto data = (dir.path / "data").string();
  REQUIRE(run_cli("synth --out " + data + " --seed 1 --windows-per-class 10", log) == 0);
  REQUIRE(run_cli("pretrain --data " + data + " --method cocoa --batch 8 --epochs 2 --out " +
                      (dir.path / "ckpt").string() + " --metrics " +
                      (dir.path / "m.jsonl").string(),
                  log) == 0);
  CHECK(fs::exists(dir.path / "ckpt" / "encoder.ckpt"));
  CHECK(fs::exists(dir.path / "m.jsonl"));

  REQUIRE(run_cli("probe --data " + data + " --ckpt " +
                      (dir.path / "ckpt" / "encoder.ckpt").string() + " --epochs 5",
                  log) == 0);
  CHECK(slurp(log).find("test_macro_f1:") != std::string::npos);
}

TEST_CASE("bench emits one row per method and grid cell") {
  TempDir dir("cocoa_cli_bench");
  auto log = dir.path / "log";
  REQUIRE(run_cli("bench --V 2,3,4 --N 8,64,256 --repeats 1 --out " +
                      (dir.path / "bench.tsv").string(),
                  log) == 0);
  std::istringstream is(slurp(dir.path / "bench.tsv"));
  std::string line;
  int cocoa_rows = 0, cmc_rows = 0;
  while (std::getline(is, line)) {
    if (line.rfind("cocoa\t", 0) == 0) ++cocoa_rows;
    if (line.rfind("cmc\t", 0) == 0) ++cmc_rows;
  }
  CHECK(cocoa_rows == 9);
  CHECK(cmc_rows == 9);
}

TEST_CASE("config file fills in values and flags override it") {
  TempDir dir("cocoa_cli_config");
  auto log = dir.path / "log";
  auto data = (dir.path / "data").string();
  REQUIRE(run_cli("synth --out " + data + " --seed 1 --windows-per-class 8", log) == 0);

  std::ofstream(dir.path / "train.conf") << "batch_size: 8\nmax_epochs: 1\nmethod: cmc\n";
  REQUIRE(run_cli("pretrain --data " + data + " --config " +
                      (dir.path / "train.conf").string() + " --method cocoa --out " +
                      (dir.path / "ckpt").string(),
                  log) == 0);

  std::ofstream(dir.path / "bad.conf") << "battch_size: 8\n";
  CHECK(run_cli("pretrain --data " + data + " --config " +
                    (dir.path / "bad.conf").string() + " --out " +
                    (dir.path / "ckpt2").string(),
                log) == 1);
  CHECK(slurp(log).find("unknown key") != std::string::npos);
}

TEST_CASE("exit codes") {
  TempDir dir("cocoa_cli_exit");
  auto log = dir.path / "log";
  CHECK(run_cli("--help", log) == 0);
  CHECK(run_cli("frobnicate", log) == 1);
  CHECK(run_cli("synth --out x --no-such-flag", log) == 1);
  // Runtime failure: dataset directory does not exist.
  CHECK(run_cli("pretrain --data " + (dir.path / "missing").string() + " --out " +
                    (dir.path / "ckpt").string(),
                log) == 2);
}

TEST_CASE("export-embeddings writes a csv") {
  TempDir dir("cocoa_cli_export");
  auto log = dir.path / "log";
  auto data = (dir.path / "data").string();
  REQUIRE(run_cli("synth --out " + data + " --seed 2 --windows-per-class 5", log) == 0);
  REQUIRE(run_cli("pretrain --data " + data + " --batch 4 --epochs 1 --out " +
                      (dir.path / "ckpt").string(),
                  log) == 0);
  REQUIRE(run_cli("export-embeddings --data " + data + " --ckpt " +
                      (dir.path / "ckpt" / "encoder.ckpt").string() + " --out " +
                      (dir.path / "emb.csv").string(),
                  log) == 0);
  std::string head = slurp(dir.path / "emb.csv").substr(0, 6);
  CHECK(head == "e0,e1,");
}
