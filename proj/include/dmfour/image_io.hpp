#pragma once

#include "dmfour/tensor.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>

namespace dmfour {

/// Unreadable, malformed or inconsistent input data.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Reads an 8- or 16-bit PNG as a 1CHW tensor in [0, 1]. Grayscale images give C = 1, colour
/// images C = 3; alpha is dropped and palettes are expanded.
Tensor read_png(const std::filesystem::path& path);

/// Writes a 1CHW (C = 1 or 3) tensor, clamping to [0, 1] and rounding to `bit_depth` (8 or 16) bits.
/// The file is written to a temporary name and renamed into place.
void write_png(const std::filesystem::path& path, const Tensor& image, int bit_depth = 8);

/// Writes `contents` to `path` through a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

/// Collapses a 1-channel image to itself and a 3-channel image to its luminance.
Tensor to_gray(const Tensor& image);
/// Replicates a 1-channel image to three channels; 3-channel images pass through.
Tensor to_rgb(const Tensor& image);

} // namespace dmfour
