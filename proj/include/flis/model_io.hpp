#pragma once

#include "flis/pipeline.hpp"

#include <filesystem>
#include <string>

namespace flis::model_io {

inline constexpr int kFormatVersion = 1;

/// Layout: "FLIS\x01", uint32 little-endian header length, UTF-8 header of
/// key=value lines, then for every partition D (d x cols) and W (3 x cols)
/// as row-major little-endian float64.
std::string serialize(const Model& model);

/// Throws BadMagic, VersionMismatch, Truncated (with the partition whose
/// matrices are cut short, -1 for the header) or FormatError.
Model deserialize(const std::string& bytes);

void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

/// 64-bit FNV-1a of the bytes as 16 hex digits.
std::string checksum(const std::string& bytes);

/// Byte offset at which partition p's D matrix starts in serialize(model).
size_t partition_offset(const Model& model, int p);

} // namespace flis::model_io
