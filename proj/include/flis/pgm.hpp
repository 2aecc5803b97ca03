#pragma once

#include "flis/imaging.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace flis::pgm {

/// Binary (P5) graymap. maxval <= 255 is stored with one byte per sample,
/// larger values big-endian with two bytes.
struct Image {
    int width = 0;
    int height = 0;
    int maxval = 255;
    std::vector<uint16_t> pixels; // row-major
};

/// Throws InputError if the file cannot be opened, FormatError if it is not
/// a well-formed P5 file.
Image read(const std::filesystem::path& path);
void write(const std::filesystem::path& path, const Image& img);

Slice to_slice(const Image& img);                 // value / maxval
LabelMap to_labels(const Image& img);             // raw values, must be 0..3
Mask to_mask(const Image& img);                   // nonzero -> 1
Image from_slice(const Slice& s, int maxval = 65535);
Image from_labels(const LabelMap& labels);        // raw values, maxval 255
Image from_mask(const Mask& m);                   // 0 / 255

/// All *.pgm files of a directory in lexicographic order.
std::vector<std::filesystem::path> list_slices(const std::filesystem::path& dir);

} // namespace flis::pgm
