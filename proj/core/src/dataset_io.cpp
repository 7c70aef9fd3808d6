#include "cocoa/dataset_io.hpp"

#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cocoa/errors.hpp"
#include "cocoa/kvtree.hpp"

namespace cocoa {
namespace {

constexpr int kFormatVersion = 1;

void write_file(const std::filesystem::path& path, const void* data, std::size_t bytes) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw io_error("dataset: cannot open " + path.string() + " for writing");
  os.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
  if (!os) throw io_error("dataset: write failed for " + path.string());
}

std::vector<char> read_file_exact(const std::filesystem::path& path, std::size_t expected) {
  std::error_code ec;
  auto actual = std::filesystem::file_size(path, ec);
  if (ec) throw io_error("dataset: cannot stat " + path.string());
  if (actual != expected)
    throw io_error("dataset: corrupt file " + path.string() + " (expected " +
                   std::to_string(expected) + " bytes, found " + std::to_string(actual) + ")");
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("dataset: cannot open " + path.string());
  std::vector<char> buf(expected);
  if (!is.read(buf.data(), static_cast<std::streamsize>(expected)))
    throw io_error("dataset: read failed for " + path.string());
  return buf;
}

std::size_t parse_size(const std::string& text, const char* what) {
  try {
    return static_cast<std::size_t>(std::stoull(text));
  } catch (const std::exception&) {
    throw input_error("dataset manifest: bad " + std::string(what) + " '" + text + "'");
  }
}

}  // namespace

std::filesystem::path write_dataset(const Dataset& dataset,
                                    const std::filesystem::path& directory) {
  dataset.validate();
  std::filesystem::create_directories(directory);

  KvNode manifest;
  manifest.set("format_version", std::to_string(kFormatVersion));
  manifest.set("num_windows", std::to_string(dataset.num_windows()));
  for (const std::string& c : dataset.classes) manifest.set("class", c);

  for (const ModalityData& m : dataset.modalities) {
    std::string file = m.name + ".f32";
    KvNode& node = manifest.add_child("modality");
    node.set("name", m.name);
    node.set("channels", std::to_string(m.channels));
    node.set("window", std::to_string(m.window));
    node.set("file", file);

    std::vector<float> f32(m.values.size());
    for (std::size_t i = 0; i < f32.size(); ++i) f32[i] = static_cast<float>(m.values[i]);
    write_file(directory / file, f32.data(), f32.size() * sizeof(float));
  }

  if (dataset.labeled()) {
    manifest.set("labels", "labels.u32");
    write_file(directory / "labels.u32", dataset.labels.data(),
               dataset.labels.size() * sizeof(std::uint32_t));
  }

  auto manifest_path = directory / "manifest.txt";
  std::ofstream os(manifest_path);
  if (!os) throw io_error("dataset: cannot open " + manifest_path.string());
  os << kv_serialize(manifest);
  if (!os) throw io_error("dataset: write failed for " + manifest_path.string());
  return manifest_path;
}

Dataset read_dataset(const std::filesystem::path& manifest_path) {
  std::ifstream is(manifest_path);
  if (!is) throw io_error("dataset: cannot open " + manifest_path.string());
  std::stringstream buffer;
  buffer << is.rdbuf();
  KvNode manifest = kv_parse(buffer.str());

  auto version = parse_size(manifest.get("format_version"), "format_version");
  if (version != kFormatVersion)
    throw input_error("dataset manifest: unsupported format_version " +
                      std::to_string(version));
  std::size_t n = parse_size(manifest.get("num_windows"), "num_windows");
  if (n == 0) throw input_error("dataset manifest: num_windows must be >= 1");

  Dataset out;
  for (const KvNode* c : manifest.all("class")) out.classes.push_back(c->value);

  auto dir = manifest_path.parent_path();
  for (const KvNode* node : manifest.all("modality")) {
    ModalityData m;
    m.name = node->get("name");
    m.channels = parse_size(node->get("channels"), "channels");
    m.window = parse_size(node->get("window"), "window");
    if (m.channels == 0 || m.window == 0)
      throw input_error("dataset manifest: modality '" + m.name + "' has zero dimension");
    std::size_t count = n * m.window * m.channels;
    auto bytes = read_file_exact(dir / node->get("file"), count * sizeof(float));
    const auto* f32 = reinterpret_cast<const float*>(bytes.data());
    m.values.resize(count);
    for (std::size_t i = 0; i < count; ++i) m.values[i] = static_cast<double>(f32[i]);
    out.modalities.push_back(std::move(m));
  }
  if (out.modalities.empty()) throw input_error("dataset manifest: no modalities");

  if (const KvNode* lbl = manifest.find("labels")) {
    auto bytes = read_file_exact(dir / lbl->value, n * sizeof(std::uint32_t));
    const auto* u32 = reinterpret_cast<const std::uint32_t*>(bytes.data());
    out.labels.assign(u32, u32 + n);
  }

  out.window_span = out.modalities[0].window;
  out.window_ids.resize(n);
  out.window_starts.resize(n);
  std::iota(out.window_ids.begin(), out.window_ids.end(), 0);
  for (std::size_t i = 0; i < n; ++i) out.window_starts[i] = i * out.window_span;
  out.validate();
  return out;
}

void export_embeddings(std::span<const double> embeddings, std::size_t rows,
                       std::size_t cols, std::span<const std::uint32_t> labels,
                       const std::filesystem::path& path) {
  if (embeddings.size() != rows * cols)
    throw usage_error("export_embeddings: matrix size mismatch");
  if (labels.size() != rows)
    throw input_error("export_embeddings: " + std::to_string(labels.size()) +
                      " labels for " + std::to_string(rows) + " rows");
  std::ofstream os(path);
  if (!os) throw io_error("export: cannot open " + path.string());
  for (std::size_t j = 0; j < cols; ++j) os << "e" << j << ",";
  os << "label\n";
  char buf[40];
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", embeddings[i * cols + j]);
      os << buf << ",";
    }
    os << labels[i] << "\n";
  }
  if (!os) throw io_error("export: write failed for " + path.string());
}

}  // namespace cocoa
