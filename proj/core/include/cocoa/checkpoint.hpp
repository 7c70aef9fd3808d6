#pragma once

#include <filesystem>

#include "cocoa/encoder.hpp"

namespace cocoa {

/// Versioned binary parameter container: magic "COCO", format version u32,
/// then per-parameter records (length-prefixed UTF-8 name, u32 shape list,
/// little-endian f64 payload).
void save_checkpoint(const EncoderParams& params, const std::filesystem::path& path);

/// Loads a checkpoint into the structure implied by `config`; every parameter
/// must be present with a matching shape.
EncoderParams load_checkpoint(const EncoderConfig& config,
                              const std::filesystem::path& path);

}  // namespace cocoa
