#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cocoa/batching.hpp"

namespace cocoa {

/// Writes the dataset under `directory`: a key/value manifest plus one raw
/// little-endian f32 tensor file per modality ([num_windows, window, channels],
/// no header) and a little-endian u32 labels file. Returns the manifest path.
std::filesystem::path write_dataset(const Dataset& dataset,
                                    const std::filesystem::path& directory);

/// Reads and validates a dataset; file sizes must match the manifest exactly.
Dataset read_dataset(const std::filesystem::path& manifest_path);

/// Delimiter-separated embedding export: header row, then one row per sample
/// with the embedding values (17 significant digits) followed by the label.
void export_embeddings(std::span<const double> embeddings, std::size_t rows,
                       std::size_t cols, std::span<const std::uint32_t> labels,
                       const std::filesystem::path& path);

}  // namespace cocoa
