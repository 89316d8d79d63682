#pragma once

#include "dmfour/image_io.hpp"
#include "dmfour/training.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace dmfour {

struct DatasetLoad {
    std::vector<ImagePair> pairs;  ///< sorted by id
    std::vector<std::string> warnings; ///< skipped or rejected files, one line each
};

/// Loads `root/low/*.png` paired with `root/gt/*.png` by filename, and `root/ir/*.png` when present.
/// Unmatched files and size mismatches are skipped with a warning; zero pairs is a DataError.
DatasetLoad load_dataset(const std::filesystem::path& root);

struct SyntheticOptions {
    std::size_t pairs = 16;
    std::size_t size = 64;
    std::uint64_t seed = 7;
    double gamma_min = 2.0;
    double gamma_max = 3.0;
    double noise_sigma = 0.02;
};

/// Procedural ground truths (gradients, checkerboards, filtered noise) and gamma-darkened noisy
/// inputs. Values are rounded to the 8-bit grid so the in-memory pairs equal their PNG files.
std::vector<ImagePair> generate_synthetic(const SyntheticOptions& opt);

/// Writes `low/` and `gt/` PNGs named pair_XXX.png under `root`.
void write_dataset(const std::filesystem::path& root, const std::vector<ImagePair>& pairs);

} // namespace dmfour
