// cocoa: one binary, one subcommand per pipeline stage.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cocoa/bench.hpp"
#include "cocoa/checkpoint.hpp"
#include "cocoa/dataset_io.hpp"
#include "cocoa/errors.hpp"
#include "cocoa/kvtree.hpp"
#include "cocoa/pipeline.hpp"
#include "cocoa/synth.hpp"

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  if (out.empty()) throw cocoa::config_error("empty list '" + text + "'");
  return out;
}

template <typename T>
std::vector<T> parse_list(const std::string& text) {
  std::vector<T> out;
  for (const std::string& item : split_list(text)) {
    try {
      if constexpr (std::is_floating_point_v<T>)
        out.push_back(static_cast<T>(std::stod(item)));
      else
        out.push_back(static_cast<T>(std::stoull(item)));
    } catch (const std::exception&) {
      throw cocoa::config_error("bad list element '" + item + "' in '" + text + "'");
    }
  }
  return out;
}

/// Bridges `--config file` to the flag set of one subcommand. File values fill
/// in only where the flag was not given on the command line.
class ConfigKeys {
 public:
  ConfigKeys(CLI::App* app) : app_(app) {}

  void bind(const std::string& key, const std::string& flag,
            std::function<void(const std::string&)> setter) {
    setters_[key] = {flag, std::move(setter)};
  }

  void apply(const std::string& path) const {
    std::ifstream is(path);
    if (!is) throw cocoa::io_error("config: cannot open " + path);
    std::stringstream buffer;
    buffer << is.rdbuf();
    cocoa::KvNode root = cocoa::kv_parse(buffer.str());
    for (const auto& [key, node] : root.children) {
      auto it = setters_.find(key);
      if (it == setters_.end())
        throw cocoa::config_error("config: unknown key '" + key + "' in " + path);
      if (!node.is_leaf())
        throw cocoa::config_error("config: key '" + key + "' must be a leaf value");
      if (app_->count(it->second.first) == 0) it->second.second(node.value);
    }
  }

 private:
  CLI::App* app_;
  std::map<std::string, std::pair<std::string, std::function<void(const std::string&)>>>
      setters_;
};

fs::path resolve_manifest(const std::string& data) {
  fs::path p = data;
  if (p.empty()) {
    if (const char* env = std::getenv("COCOA_DATA_DIR"))
      p = env;
    else
      throw cocoa::config_error("no --data given and COCOA_DATA_DIR is unset");
  }
  if (fs::is_directory(p)) p /= "manifest.txt";
  return p;
}

struct TrainFlags {
  std::string data;
  std::string config_file;
  std::string method = "cocoa";
  cocoa::TrainConfig train;

  void add_common(CLI::App* cmd, ConfigKeys& keys) {
    cmd->add_option("--data", data, "Dataset directory or manifest path (default $COCOA_DATA_DIR)");
    cmd->add_option("--config", config_file, "Key/value config file; flags override");
    cmd->add_option("--method", method, "Objective: cocoa|infonce|dcl|hard_dcl|barlow|cmc|supervised");
    cmd->add_option("--batch", train.batch_size, "Batch size");
    cmd->add_option("--epochs", train.max_epochs, "Maximum epochs");
    cmd->add_option("--lr", train.lr, "Adam learning rate");
    cmd->add_option("--patience", train.early_stop_patience, "Early-stopping patience");
    cmd->add_option("--seed", train.seed, "Master random seed");
    cmd->add_option("--proj-dim", train.projection_dim, "Projection layer width");
    cmd->add_option("--fusion-dim", train.fusion_dim, "Shared fusion layer width");
    cmd->add_option("--grad-clip", train.grad_clip,
                    "Global gradient-norm clip for pretrain/finetune (0 = off)");
    cmd->add_option("--tau", train.hyper.tau, "Softmax/exponential temperature");
    cmd->add_option("--lambda", train.hyper.lambda, "COCOA discriminator weight");
    cmd->add_option("--eps", train.hyper.eps, "DCL / Hard-DCL positivity floor");
    cmd->add_option("--beta", train.hyper.beta, "Hard-DCL concentration");
    cmd->add_option("--lambda-bt", train.hyper.lambda_bt, "Barlow Twins redundancy weight");

    keys.bind("data", "--data", [this](const std::string& v) { data = v; });
    keys.bind("method", "--method", [this](const std::string& v) { method = v; });
    keys.bind("batch_size", "--batch",
              [this](const std::string& v) { train.batch_size = std::stoull(v); });
    keys.bind("max_epochs", "--epochs",
              [this](const std::string& v) { train.max_epochs = std::stoull(v); });
    keys.bind("lr", "--lr", [this](const std::string& v) { train.lr = std::stod(v); });
    keys.bind("early_stop_patience", "--patience",
              [this](const std::string& v) { train.early_stop_patience = std::stoull(v); });
    keys.bind("seed", "--seed",
              [this](const std::string& v) { train.seed = std::stoull(v); });
    keys.bind("projection_dim", "--proj-dim",
              [this](const std::string& v) { train.projection_dim = std::stoull(v); });
    keys.bind("fusion_dim", "--fusion-dim",
              [this](const std::string& v) { train.fusion_dim = std::stoull(v); });
    keys.bind("grad_clip", "--grad-clip",
              [this](const std::string& v) { train.grad_clip = std::stod(v); });
    keys.bind("tau", "--tau", [this](const std::string& v) { train.hyper.tau = std::stod(v); });
    keys.bind("lambda", "--lambda",
              [this](const std::string& v) { train.hyper.lambda = std::stod(v); });
    keys.bind("eps", "--eps", [this](const std::string& v) { train.hyper.eps = std::stod(v); });
    keys.bind("beta", "--beta",
              [this](const std::string& v) { train.hyper.beta = std::stod(v); });
    keys.bind("lambda_bt", "--lambda-bt",
              [this](const std::string& v) { train.hyper.lambda_bt = std::stod(v); });
  }

  cocoa::TrainConfig finalize() {
    train.method = cocoa::method_from_string(method);
    return train;
  }
};

cocoa::EncoderConfig encoder_config(const cocoa::Dataset& dataset,
                                    const cocoa::TrainConfig& train) {
  cocoa::EncoderConfig ec = cocoa::EncoderConfig::for_dataset(dataset);
  ec.projection_dim = train.projection_dim;
  ec.fusion_dim = train.fusion_dim;
  ec.validate();
  return ec;
}

int run(int argc, char** argv) {
  CLI::App app{"COCOA: cross-modality contrastive learning for multimodal time series"};
  app.require_subcommand(1);

  // ---- synth ----
  auto* synth_cmd = app.add_subcommand("synth", "Generate the synthetic multimodal dataset");
  cocoa::SynthConfig synth;
  std::string synth_out, synth_config, synth_split;
  ConfigKeys synth_keys(synth_cmd);
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--config", synth_config, "Key/value config file; flags override");
  synth_cmd->add_option("--classes", synth.num_classes, "Number of classes");
  synth_cmd->add_option("--modalities", synth.num_modalities, "Number of modalities");
  synth_cmd->add_option("--channels", synth.channels_per_modality, "Channels per modality");
  synth_cmd->add_option("--window", synth.window, "Window length (steps)");
  synth_cmd->add_option("--windows-per-class", synth.windows_per_class, "Windows per class");
  synth_cmd->add_option("--noise-std", synth.noise_std, "Additive Gaussian noise sigma");
  synth_cmd->add_option("--distractor-amp", synth.distractor_amp,
                        "Modality-private distractor sinusoid amplitude");
  synth_cmd->add_option("--factor-split", synth_split,
                        "Comma list: class digit observed by each modality");
  synth_cmd->add_option("--seed", synth.seed, "Master random seed");
  synth_keys.bind("num_classes", "--classes",
                  [&](const std::string& v) { synth.num_classes = std::stoull(v); });
  synth_keys.bind("num_modalities", "--modalities",
                  [&](const std::string& v) { synth.num_modalities = std::stoull(v); });
  synth_keys.bind("channels_per_modality", "--channels",
                  [&](const std::string& v) { synth.channels_per_modality = std::stoull(v); });
  synth_keys.bind("window", "--window",
                  [&](const std::string& v) { synth.window = std::stoull(v); });
  synth_keys.bind("windows_per_class", "--windows-per-class",
                  [&](const std::string& v) { synth.windows_per_class = std::stoull(v); });
  synth_keys.bind("noise_std", "--noise-std",
                  [&](const std::string& v) { synth.noise_std = std::stod(v); });
  synth_keys.bind("distractor_amp", "--distractor-amp",
                  [&](const std::string& v) { synth.distractor_amp = std::stod(v); });
  synth_keys.bind("factor_split", "--factor-split",
                  [&](const std::string& v) { synth_split = v; });
  synth_keys.bind("seed", "--seed",
                  [&](const std::string& v) { synth.seed = std::stoull(v); });

  // ---- pretrain ----
  auto* pre_cmd = app.add_subcommand("pretrain", "Self-supervised encoder pretraining");
  TrainFlags pre;
  ConfigKeys pre_keys(pre_cmd);
  pre.add_common(pre_cmd, pre_keys);
  std::string pre_out, pre_metrics;
  pre_cmd->add_option("--out", pre_out, "Checkpoint output directory")->required();
  pre_cmd->add_option("--metrics", pre_metrics, "JSONL metrics output path");

  // ---- probe ----
  auto* probe_cmd = app.add_subcommand("probe", "Linear probe on frozen embeddings");
  TrainFlags probe;
  ConfigKeys probe_keys(probe_cmd);
  probe.add_common(probe_cmd, probe_keys);
  std::string probe_ckpt, probe_metrics;
  probe_cmd->add_option("--ckpt", probe_ckpt, "Encoder checkpoint path")->required();
  probe_cmd->add_option("--metrics", probe_metrics, "JSONL metrics output path");

  // ---- finetune ----
  auto* ft_cmd = app.add_subcommand("finetune", "Joint encoder + classifier training");
  TrainFlags ft;
  ConfigKeys ft_keys(ft_cmd);
  ft.add_common(ft_cmd, ft_keys);
  std::string ft_ckpt, ft_metrics;
  double ft_fraction = 1.0;
  ft_cmd->add_option("--ckpt", ft_ckpt, "Encoder checkpoint (omit for random init)");
  ft_cmd->add_option("--label-fraction", ft_fraction, "Stratified labeled fraction (0,1]");
  ft_cmd->add_option("--metrics", ft_metrics, "JSONL metrics output path");
  ft_keys.bind("label_fraction", "--label-fraction",
               [&](const std::string& v) { ft_fraction = std::stod(v); });

  // ---- label-curve ----
  auto* lc_cmd = app.add_subcommand("label-curve", "Macro-F1 vs labeled fraction");
  TrainFlags lc;
  ConfigKeys lc_keys(lc_cmd);
  lc.add_common(lc_cmd, lc_keys);
  std::string lc_fractions = "0.01,0.05,0.1,0.5,1.0";
  std::string lc_seeds = "0,1,2,3,4";
  std::string lc_out;
  std::size_t lc_jobs = 1;
  lc_cmd->add_option("--fractions", lc_fractions, "Comma list of label fractions");
  lc_cmd->add_option("--seeds", lc_seeds, "Comma list of seeds");
  lc_cmd->add_option("--jobs", lc_jobs, "Parallel independent runs");
  lc_cmd->add_option("--out", lc_out, "TSV report path")->required();

  // ---- batch-sweep ----
  auto* sweep_cmd = app.add_subcommand("batch-sweep", "Probe F1 over (method, batch, seed)");
  TrainFlags sweep;
  ConfigKeys sweep_keys(sweep_cmd);
  sweep.add_common(sweep_cmd, sweep_keys);
  std::string sweep_methods = "cocoa,cmc";
  std::string sweep_batches = "8,16,32,64";
  std::string sweep_seeds = "0,1,2";
  std::string sweep_out;
  std::size_t sweep_jobs = 1;
  sweep_cmd->add_option("--methods", sweep_methods, "Comma list of objectives");
  sweep_cmd->add_option("--batches", sweep_batches, "Comma list of batch sizes");
  sweep_cmd->add_option("--seeds", sweep_seeds, "Comma list of seeds");
  sweep_cmd->add_option("--jobs", sweep_jobs, "Parallel independent runs");
  sweep_cmd->add_option("--out", sweep_out, "TSV report path")->required();

  // ---- bench ----
  auto* bench_cmd = app.add_subcommand("bench", "Similarity-count complexity verification");
  std::string bench_v = "2,3,4,6";
  std::string bench_n = "8,64,256";
  std::string bench_out;
  std::size_t bench_dim = 32, bench_repeats = 5;
  std::uint64_t bench_seed = 0;
  bench_cmd->add_option("--V", bench_v, "Comma list of modality counts");
  bench_cmd->add_option("--N", bench_n, "Comma list of batch sizes");
  bench_cmd->add_option("--dim", bench_dim, "Embedding dimension");
  bench_cmd->add_option("--repeats", bench_repeats, "Timing repeats per cell");
  bench_cmd->add_option("--seed", bench_seed, "Master random seed");
  bench_cmd->add_option("--out", bench_out, "TSV report path (default stdout)");

  // ---- export-embeddings ----
  auto* exp_cmd = app.add_subcommand("export-embeddings",
                                     "Frozen-encoder embeddings of every window as CSV");
  TrainFlags exp;
  ConfigKeys exp_keys(exp_cmd);
  exp.add_common(exp_cmd, exp_keys);
  std::string exp_ckpt, exp_out;
  exp_cmd->add_option("--ckpt", exp_ckpt, "Encoder checkpoint path")->required();
  exp_cmd->add_option("--out", exp_out, "CSV output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Prints help or the usage message; anything but help is exit 1.
    return app.exit(e) == 0 ? 0 : 1;
  }

  if (*synth_cmd) {
    if (!synth_config.empty()) synth_keys.apply(synth_config);
    if (!synth_split.empty())
      for (auto d : parse_list<int>(synth_split)) synth.factor_split.push_back(d);
    cocoa::Dataset dataset = cocoa::generate(synth);
    auto manifest = cocoa::write_dataset(dataset, synth_out);
    std::cout << "manifest: " << manifest.string() << "\n"
              << "windows: " << dataset.num_windows() << "\n"
              << "hash: " << std::hex << dataset.content_hash() << std::dec << "\n";
    return 0;
  }

  if (*pre_cmd) {
    if (!pre.config_file.empty()) pre_keys.apply(pre.config_file);
    cocoa::TrainConfig config = pre.finalize();
    cocoa::Dataset dataset = cocoa::read_dataset(resolve_manifest(pre.data));
    cocoa::DatasetSplit split = cocoa::split_dataset(dataset, {}, config.seed);
    cocoa::PretrainResult result = cocoa::pretrain(split, config);
    fs::create_directories(pre_out);
    cocoa::save_checkpoint(result.params, fs::path(pre_out) / "encoder.ckpt");
    if (!pre_metrics.empty()) cocoa::write_metrics_jsonl(result.metrics, pre_metrics);
    std::cout << "checkpoint: " << (fs::path(pre_out) / "encoder.ckpt").string() << "\n"
              << "best_epoch: " << result.metrics.best_epoch << "\n"
              << "similarity_evaluations: " << result.metrics.total_similarity_evaluations
              << "\n";
    return 0;
  }

  if (*probe_cmd) {
    if (!probe.config_file.empty()) probe_keys.apply(probe.config_file);
    cocoa::TrainConfig config = probe.finalize();
    cocoa::Dataset dataset = cocoa::read_dataset(resolve_manifest(probe.data));
    cocoa::DatasetSplit split = cocoa::split_dataset(dataset, {}, config.seed);
    cocoa::EncoderParams params =
        cocoa::load_checkpoint(encoder_config(dataset, config), probe_ckpt);
    cocoa::ProbeResult result = cocoa::linear_probe(params, split, config);
    if (!probe_metrics.empty()) cocoa::write_metrics_jsonl(result.metrics, probe_metrics);
    std::cout << "test_macro_f1: " << *result.metrics.test_macro_f1 << "\n";
    return 0;
  }

  if (*ft_cmd) {
    if (!ft.config_file.empty()) ft_keys.apply(ft.config_file);
    cocoa::TrainConfig config = ft.finalize();
    cocoa::Dataset dataset = cocoa::read_dataset(resolve_manifest(ft.data));
    cocoa::DatasetSplit split = cocoa::split_dataset(dataset, {}, config.seed);
    cocoa::EncoderParams params =
        ft_ckpt.empty()
            ? cocoa::EncoderParams::init(encoder_config(dataset, config), config.seed)
            : cocoa::load_checkpoint(encoder_config(dataset, config), ft_ckpt);
    cocoa::FinetuneResult result = cocoa::finetune(params, split, config, ft_fraction);
    if (!ft_metrics.empty()) cocoa::write_metrics_jsonl(result.metrics, ft_metrics);
    std::cout << "test_macro_f1: " << *result.metrics.test_macro_f1 << "\n";
    return 0;
  }

  if (*lc_cmd) {
    if (!lc.config_file.empty()) lc_keys.apply(lc.config_file);
    cocoa::TrainConfig config = lc.finalize();
    cocoa::Dataset dataset = cocoa::read_dataset(resolve_manifest(lc.data));
    auto points = cocoa::label_curve(dataset, config.method, parse_list<double>(lc_fractions),
                                     parse_list<std::uint64_t>(lc_seeds), config, lc_jobs);
    std::ofstream os(lc_out);
    if (!os) throw cocoa::io_error("label-curve: cannot open " + lc_out);
    os << "fraction\tmean_macro_f1\tstd_macro_f1\n";
    for (const auto& p : points)
      os << p.fraction << '\t' << p.mean_macro_f1 << '\t' << p.std_macro_f1 << '\n';
    std::cout << "report: " << lc_out << "\n";
    return 0;
  }

  if (*sweep_cmd) {
    if (!sweep.config_file.empty()) sweep_keys.apply(sweep.config_file);
    cocoa::TrainConfig config = sweep.finalize();
    cocoa::Dataset dataset = cocoa::read_dataset(resolve_manifest(sweep.data));
    std::vector<cocoa::Method> methods;
    for (const std::string& m : split_list(sweep_methods))
      methods.push_back(cocoa::method_from_string(m));
    auto rows = cocoa::batch_sweep(dataset, methods, parse_list<std::size_t>(sweep_batches),
                                   parse_list<std::uint64_t>(sweep_seeds), config, sweep_jobs);
    std::ofstream os(sweep_out);
    if (!os) throw cocoa::io_error("batch-sweep: cannot open " + sweep_out);
    os << "method\tbatch_size\tseed\tmacro_f1\tsimilarity_evaluations\twall_seconds\n";
    for (const auto& r : rows)
      os << r.method << '\t' << r.batch_size << '\t' << r.seed << '\t' << r.macro_f1 << '\t'
         << r.similarity_evaluations << '\t' << r.wall_seconds << '\n';
    std::cout << "report: " << sweep_out << "\n";
    return 0;
  }

  if (*bench_cmd) {
    cocoa::BenchReport report =
        cocoa::run_bench(parse_list<std::uint64_t>(bench_v), parse_list<std::uint64_t>(bench_n),
                         bench_dim, bench_repeats, bench_seed);
    if (bench_out.empty()) {
      std::cout << "method\tV\tN\tmeasured_count\tformula_count\twall_seconds\n";
      for (const auto& r : report.rows)
        std::cout << r.method << '\t' << r.num_modalities << '\t' << r.batch_size << '\t'
                  << r.measured_count << '\t' << r.formula_count << '\t' << r.wall_seconds
                  << '\n';
    } else {
      cocoa::write_bench_report(report, bench_out);
      std::cout << "report: " << bench_out << "\n";
    }
    return 0;
  }

  if (*exp_cmd) {
    if (!exp.config_file.empty()) exp_keys.apply(exp.config_file);
    cocoa::TrainConfig config = exp.finalize();
    cocoa::Dataset dataset = cocoa::read_dataset(resolve_manifest(exp.data));
    cocoa::EncoderParams params =
        cocoa::load_checkpoint(encoder_config(dataset, config), exp_ckpt);
    cocoa::Tensor emb = cocoa::encode_concat(params, cocoa::full_batch(dataset));
    cocoa::export_embeddings(emb.data(), emb.dim(0), emb.dim(1), dataset.labels, exp_out);
    std::cout << "embeddings: " << exp_out << "\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const cocoa::config_error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  } catch (const cocoa::input_error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  } catch (const cocoa::usage_error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
}
