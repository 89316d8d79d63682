#include "dmfour/dataset.hpp"

#include "dmfour/fourier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>

namespace dmfour {

namespace {

std::map<std::string, std::filesystem::path> list_png(const std::filesystem::path& dir)
{
    std::map<std::string, std::filesystem::path> files;
    if (!std::filesystem::is_directory(dir)) {
        return files;
    }
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".png") {
            files.emplace(entry.path().filename().string(), entry.path());
        }
    }
    return files;
}

} // namespace

DatasetLoad load_dataset(const std::filesystem::path& root)
{
    const std::filesystem::path low_dir = root / "low";
    const std::filesystem::path gt_dir = root / "gt";
    if (!std::filesystem::is_directory(low_dir) || !std::filesystem::is_directory(gt_dir)) {
        throw DataError("dataset " + root.string() + " needs low/ and gt/ subdirectories");
    }
    const auto low = list_png(low_dir);
    const auto gt = list_png(gt_dir);
    const auto ir = list_png(root / "ir");

    DatasetLoad out;
    for (const auto& [name, path] : low) {
        if (!gt.contains(name)) {
            out.warnings.push_back("unmatched " + path.string() + " (no gt/" + name + ")");
            continue;
        }
        const std::string id = std::filesystem::path(name).stem().string();
        try {
            Tensor l = to_rgb(read_png(path));
            Tensor g = to_rgb(read_png(gt.at(name)));
            Tensor i;
            if (auto it = ir.find(name); it != ir.end()) {
                i = to_gray(read_png(it->second));
            }
            out.pairs.push_back(make_pair(id, std::move(l), std::move(g), std::move(i)));
        } catch (const ShapeError& e) {
            out.warnings.push_back("rejected pair " + id + ": " + e.what());
        }
    }
    for (const auto& [name, path] : gt) {
        if (!low.contains(name)) {
            out.warnings.push_back("unmatched " + path.string() + " (no low/" + name + ")");
        }
    }
    for (const auto& [name, path] : ir) {
        if (!low.contains(name) || !gt.contains(name)) {
            out.warnings.push_back("unmatched " + path.string());
        }
    }
    if (out.pairs.empty()) {
        throw DataError("dataset " + root.string() + " contains no usable pairs");
    }
    return out;
}

namespace {

double on_8bit_grid(double v)
{
    return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
}

// Gaussian noise smoothed by a few passes of a 3x3 box filter with wrap-around, rescaled to [-1, 1].
std::vector<double> filtered_noise(std::size_t n, Rng& rng)
{
    std::vector<double> f(n * n);
    for (double& v : f) {
        v = rng.normal();
    }
    for (int pass = 0; pass < 4; ++pass) {
        std::vector<double> g(n * n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (std::size_t di = 0; di < 3; ++di) {
                    for (std::size_t dj = 0; dj < 3; ++dj) {
                        s += f[((i + n + di - 1) % n) * n + (j + n + dj - 1) % n];
                    }
                }
                g[i * n + j] = s / 9.0;
            }
        }
        f = std::move(g);
    }
    double peak = 1e-12;
    for (double v : f) {
        peak = std::max(peak, std::abs(v));
    }
    for (double& v : f) {
        v /= peak;
    }
    return f;
}

} // namespace

std::vector<ImagePair> generate_synthetic(const SyntheticOptions& opt)
{
    if (opt.pairs == 0 || opt.size == 0) {
        throw std::invalid_argument("generate_synthetic: pairs and size must be positive");
    }
    Rng rng(opt.seed);
    const std::size_t n = opt.size;
    std::vector<ImagePair> out;
    for (std::size_t k = 0; k < opt.pairs; ++k) {
        const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double period = rng.uniform(4.0, 16.0);
        const double checker_amp = rng.uniform(0.05, 0.2);
        const double noise_amp = rng.uniform(0.05, 0.2);
        std::array<double, 3> c0{}, c1{};
        for (std::size_t c = 0; c < 3; ++c) {
            c0[c] = rng.uniform(0.15, 0.5);
            c1[c] = rng.uniform(0.5, 0.9);
        }
        const std::vector<double> noise = filtered_noise(n, rng);
        const double gamma = rng.uniform(opt.gamma_min, opt.gamma_max);

        Tensor gt({1, 3, n, n});
        Tensor low({1, 3, n, n});
        const double ca = std::cos(angle);
        const double sa = std::sin(angle);
        const double span = n > 1 ? static_cast<double>(n - 1) : 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                const double u = static_cast<double>(i) / span;
                const double v = static_cast<double>(j) / span;
                const double t = std::clamp(0.5 + 0.5 * ((u - 0.5) * ca + (v - 0.5) * sa) * std::numbers::sqrt2,
                                            0.0, 1.0);
                const bool odd = (static_cast<long>(std::floor(static_cast<double>(i) / period)) +
                                  static_cast<long>(std::floor(static_cast<double>(j) / period))) % 2 != 0;
                const double pattern = (odd ? checker_amp : -checker_amp) + noise_amp * noise[i * n + j];
                for (std::size_t c = 0; c < 3; ++c) {
                    const double g = on_8bit_grid(c0[c] + (c1[c] - c0[c]) * t + pattern);
                    gt.at(0, c, i, j) = g;
                    low.at(0, c, i, j) = on_8bit_grid(std::pow(g, gamma) + opt.noise_sigma * rng.normal());
                }
            }
        }
        char id[32];
        std::snprintf(id, sizeof id, "pair_%03zu", k);
        out.push_back(make_pair(id, std::move(low), std::move(gt)));
    }
    return out;
}

void write_dataset(const std::filesystem::path& root, const std::vector<ImagePair>& pairs)
{
    std::filesystem::create_directories(root / "low");
    std::filesystem::create_directories(root / "gt");
    for (const ImagePair& p : pairs) {
        write_png(root / "low" / (p.id + ".png"), p.low);
        write_png(root / "gt" / (p.id + ".png"), p.gt);
    }
}

} // namespace dmfour
