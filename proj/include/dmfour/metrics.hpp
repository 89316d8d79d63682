#pragma once

#include "dmfour/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dmfour {

struct SsimOptions {
    std::size_t window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double peak = 1.0;
};

/// 10 log10(peak^2 / MSE) over all elements; +infinity when MSE is zero.
double psnr(const Tensor& a, const Tensor& b, double peak = 1.0);

/// Mean local SSIM over valid windows, averaged over every (batch, channel) plane.
double ssim(const Tensor& a, const Tensor& b, const SsimOptions& opt = {});

double mae(const Tensor& a, const Tensor& b);

/// |a - b| per element.
Tensor diff_map(const Tensor& a, const Tensor& b);

/// Histogram of a minus histogram of b over [0, 1]. Bins are right-closed: v lands in
/// bin ceil(v * bins) - 1, with 0 in bin 0; values outside [0, 1] are clamped first.
std::vector<std::int64_t> hist_diff(const Tensor& a, const Tensor& b, std::size_t bins = 64);

struct MetricReport {
    double psnr_db = 0.0;
    double ssim = 0.0;
    double mae = 0.0;
    SsimOptions ssim_options{};

    /// JSON object; an infinite PSNR is written as the string "inf".
    std::string to_json() const;
};

MetricReport evaluate_pair(const Tensor& a, const Tensor& b, const SsimOptions& opt = {});

} // namespace dmfour
