#include "cocoa/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

#include "cocoa/errors.hpp"

namespace cocoa {
namespace {

constexpr char kMagic[4] = {'C', 'O', 'C', 'O'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is, const std::filesystem::path& path) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw io_error("checkpoint: truncated file " + path.string());
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void save_checkpoint(const EncoderParams& params, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw io_error("checkpoint: cannot open " + path.string() + " for writing");
  os.write(kMagic, 4);
  write_u32(os, kVersion);
  auto named = params.named_tensors();
  write_u32(os, static_cast<std::uint32_t>(named.size()));
  for (const auto& [name, t] : named) {
    write_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(os, static_cast<std::uint32_t>(t.shape().size()));
    for (std::size_t d : t.shape()) write_u32(os, static_cast<std::uint32_t>(d));
    auto data = t.data();
    os.write(reinterpret_cast<const char*>(data.data()),
             static_cast<std::streamsize>(data.size() * sizeof(double)));
  }
  if (!os) throw io_error("checkpoint: write failed for " + path.string());
}

EncoderParams load_checkpoint(const EncoderConfig& config,
                              const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("checkpoint: cannot open " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw input_error("checkpoint: bad magic in " + path.string());
  std::uint32_t version = read_u32(is, path);
  if (version != kVersion)
    throw input_error("checkpoint: unsupported format version " + std::to_string(version));
  std::uint32_t count = read_u32(is, path);

  std::map<std::string, std::pair<std::vector<std::size_t>, std::vector<double>>> records;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t name_len = read_u32(is, path);
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len))
      throw io_error("checkpoint: truncated file " + path.string());
    std::uint32_t ndim = read_u32(is, path);
    std::vector<std::size_t> shape(ndim);
    std::size_t n = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      shape[d] = read_u32(is, path);
      n *= shape[d];
    }
    std::vector<double> data(n);
    if (!is.read(reinterpret_cast<char*>(data.data()),
                 static_cast<std::streamsize>(n * sizeof(double))))
      throw io_error("checkpoint: truncated file " + path.string());
    records[name] = {std::move(shape), std::move(data)};
  }

  EncoderParams params = EncoderParams::init(config, 0);
  for (auto& [name, t] : params.named_tensors()) {
    auto it = records.find(name);
    if (it == records.end())
      throw input_error("checkpoint: missing parameter '" + name + "' in " + path.string());
    if (it->second.first != t.shape())
      throw input_error("checkpoint: shape mismatch for '" + name + "'");
    auto dst = t.data();
    std::copy(it->second.second.begin(), it->second.second.end(), dst.begin());
  }
  if (records.size() != params.named_tensors().size())
    throw input_error("checkpoint: unexpected extra parameters in " + path.string());
  return params;
}

}  // namespace cocoa
