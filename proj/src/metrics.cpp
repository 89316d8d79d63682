#include "dmfour/metrics.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace dmfour {

double psnr(const Tensor& a, const Tensor& b, double peak)
{
    require_same_shape(a, b, "psnr");
    const double m = mean_sq_diff(a, b);
    if (m == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return 10.0 * std::log10(peak * peak / m);
}

namespace {

std::vector<double> gaussian_window(std::size_t n, double sigma)
{
    std::vector<double> g(n);
    const double c = static_cast<double>(n - 1) / 2.0;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(i) - c;
        g[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        total += g[i];
    }
    for (double& v : g) {
        v /= total;
    }
    return g;
}

// Valid-mode separable filtering of one h x w plane.
std::vector<double> filter_valid(const double* x, std::size_t h, std::size_t w, const std::vector<double>& g)
{
    const std::size_t n = g.size();
    const std::size_t ow = w - n + 1;
    const std::size_t oh = h - n + 1;
    std::vector<double> rows(h * ow);
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < ow; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                s += g[k] * x[i * w + j + k];
            }
            rows[i * ow + j] = s;
        }
    }
    std::vector<double> out(oh * ow);
    for (std::size_t i = 0; i < oh; ++i) {
        for (std::size_t j = 0; j < ow; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                s += g[k] * rows[(i + k) * ow + j];
            }
            out[i * ow + j] = s;
        }
    }
    return out;
}

} // namespace

double ssim(const Tensor& a, const Tensor& b, const SsimOptions& opt)
{
    require_same_shape(a, b, "ssim");
    require_rank(a, 4, "ssim");
    const std::size_t h = a.dim(2);
    const std::size_t w = a.dim(3);
    if (h < opt.window || w < opt.window) {
        throw ShapeError("ssim: image " + shape_str(a.shape()) + " is smaller than the " +
                         std::to_string(opt.window) + "x" + std::to_string(opt.window) + " window");
    }
    const std::vector<double> g = gaussian_window(opt.window, opt.sigma);
    const double c1 = (opt.k1 * opt.peak) * (opt.k1 * opt.peak);
    const double c2 = (opt.k2 * opt.peak) * (opt.k2 * opt.peak);
    const std::size_t plane = h * w;
    const std::size_t planes = a.size() / plane;

    double total = 0.0;
    for (std::size_t p = 0; p < planes; ++p) {
        const double* x = &a[p * plane];
        const double* y = &b[p * plane];
        std::vector<double> xx(plane), yy(plane), xy(plane);
        for (std::size_t i = 0; i < plane; ++i) {
            xx[i] = x[i] * x[i];
            yy[i] = y[i] * y[i];
            xy[i] = x[i] * y[i];
        }
        const std::vector<double> mx = filter_valid(x, h, w, g);
        const std::vector<double> my = filter_valid(y, h, w, g);
        const std::vector<double> sxx = filter_valid(xx.data(), h, w, g);
        const std::vector<double> syy = filter_valid(yy.data(), h, w, g);
        const std::vector<double> sxy = filter_valid(xy.data(), h, w, g);
        double acc = 0.0;
        for (std::size_t i = 0; i < mx.size(); ++i) {
            const double vx = sxx[i] - mx[i] * mx[i];
            const double vy = syy[i] - my[i] * my[i];
            const double cov = sxy[i] - mx[i] * my[i];
            const double num = (2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2);
            const double den = (mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2);
            acc += num / den;
        }
        total += acc / static_cast<double>(mx.size());
    }
    return total / static_cast<double>(planes);
}

double mae(const Tensor& a, const Tensor& b)
{
    return mean_abs_diff(a, b);
}

Tensor diff_map(const Tensor& a, const Tensor& b)
{
    require_same_shape(a, b, "diff_map");
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = std::abs(a[i] - b[i]);
    }
    return out;
}

namespace {

std::size_t bin_of(double v, std::size_t bins)
{
    const double c = std::clamp(v, 0.0, 1.0);
    const double k = std::ceil(c * static_cast<double>(bins));
    return k < 1.0 ? 0 : static_cast<std::size_t>(k) - 1;
}

} // namespace

std::vector<std::int64_t> hist_diff(const Tensor& a, const Tensor& b, std::size_t bins)
{
    require_same_shape(a, b, "hist_diff");
    if (bins == 0) {
        throw std::invalid_argument("hist_diff: bins must be positive");
    }
    std::vector<std::int64_t> h(bins, 0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        ++h[bin_of(a[i], bins)];
        --h[bin_of(b[i], bins)];
    }
    return h;
}

std::string MetricReport::to_json() const
{
    nlohmann::ordered_json j;
    if (std::isinf(psnr_db)) {
        j["psnr_db"] = "inf";
    } else {
        j["psnr_db"] = psnr_db;
    }
    j["ssim"] = ssim;
    j["mae"] = mae;
    j["ssim_window"] = ssim_options.window;
    j["ssim_sigma"] = ssim_options.sigma;
    j["ssim_k1"] = ssim_options.k1;
    j["ssim_k2"] = ssim_options.k2;
    return j.dump();
}

MetricReport evaluate_pair(const Tensor& a, const Tensor& b, const SsimOptions& opt)
{
    return {psnr(a, b), ssim(a, b, opt), mae(a, b), opt};
}

} // namespace dmfour
