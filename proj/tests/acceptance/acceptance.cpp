// Acceptance checks. Prints one PASS/FAIL line per criterion and exits nonzero on any failure.

#include "gradient_suite.hpp"
#include "oracles.hpp"

#include "dmfour/checkpoint.hpp"
#include "dmfour/cli.hpp"
#include "dmfour/color.hpp"
#include "dmfour/dataset.hpp"
#include "dmfour/fourier.hpp"
#include "dmfour/image_io.hpp"
#include "dmfour/metrics.hpp"
#include "dmfour/stage1.hpp"
#include "dmfour/training.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

using namespace dmfour;
namespace fs = std::filesystem;
using oracle::random_tensor;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what)
    {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

int failures = 0;

void report(const std::string& name, Outcome& o)
{
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ":" << o.detail.str() << std::endl;
    if (!o.pass) {
        ++failures;
    }
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<nlohmann::json> read_jsonl(const fs::path& p)
{
    std::vector<nlohmann::json> v;
    std::istringstream in(slurp(p));
    for (std::string line; std::getline(in, line);) {
        if (!line.empty()) v.push_back(nlohmann::json::parse(line));
    }
    return v;
}

int cli(const std::vector<std::string>& args)
{
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    if (code != 0) {
        std::cerr << err.str();
    }
    return code;
}

// -----------------------------------------------------------------------------------------------

void dft_oracle()
{
    Outcome o;
    const auto t0 = Clock::now();
    double worst = 0.0;
    for (std::size_t h = 1; h <= 8; ++h) {
        for (std::size_t w = 1; w <= 8; ++w) {
            const Tensor x = random_tensor({1, 2, h, w}, 10 * h + w);
            const ComplexField got = fft2(x);
            const ComplexField want = oracle::brute_dft2(x);
            worst = std::max({worst, oracle::max_abs_diff(got.re, want.re), oracle::max_abs_diff(got.im, want.im)});
        }
    }
    o.require(worst < 1e-9, "brute-force agreement");

    double parseval = 0.0, symmetry = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed);
        const std::size_t h = 1 + rng.index(16), w = 1 + rng.index(16);
        const Tensor x = random_tensor({1, 1, h, w}, rng);
        const ComplexField f = fft2(x);
        double es = 0.0, ef = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            es += x[i] * x[i];
            ef += f.re[i] * f.re[i] + f.im[i] * f.im[i];
        }
        parseval = std::max(parseval, std::abs(es - ef) / std::max(1.0, es));
        for (std::size_t u = 0; u < h; ++u)
            for (std::size_t v = 0; v < w; ++v) {
                const std::size_t mu = (h - u) % h, mv = (w - v) % w;
                symmetry = std::max(symmetry, std::abs(f.re.at(0, 0, u, v) - f.re.at(0, 0, mu, mv)));
                symmetry = std::max(symmetry, std::abs(f.im.at(0, 0, u, v) + f.im.at(0, 0, mu, mv)));
            }
    }
    o.require(parseval < 1e-9, "Parseval");
    o.require(symmetry < 1e-9, "conjugate symmetry");
    const double secs = seconds_since(t0);
    o.require(secs < 10.0, "runtime");
    o.detail << " sizes 1..8 x 1..8 max error " << worst << "; 100 seeds Parseval " << parseval << ", symmetry "
             << symmetry << "; " << secs << " s";
    report("DFT oracle", o);
}

void round_trip()
{
    Outcome o;
    const Tensor x = random_tensor({1, 3, 64, 64}, 5, 0.0, 1.0);
    const double fwd_inv = oracle::max_abs_diff(ifft2_real(fft2(x)), x);
    const ComplexField f = fft2(x);
    const ComplexField g = recompose(decompose(f));
    const double polar = std::max(oracle::max_abs_diff(f.re, g.re), oracle::max_abs_diff(f.im, g.im));
    o.require(fwd_inv < 1e-9, "ifft2(fft2(x))");
    o.require(polar < 1e-9, "recompose(decompose(X))");

    auto positive_non_decreasing = [](const std::vector<double>& c) {
        for (std::size_t i = 0; i < c.size(); ++i) {
            if (!(c[i] > 0.0) || (i > 0 && c[i] < c[i - 1])) return false;
        }
        return true;
    };
    const Tensor sample = read_png(fs::path(DMFOUR_SAMPLE_DIR) / "gt/astronaut.png");
    const std::vector<double> trunc = roundtrip_curve(sample, 100, Quantization::floor8);
    const std::vector<double> rounded = roundtrip_curve(x, 100, Quantization::round8);
    o.require(trunc.size() == 100 && positive_non_decreasing(trunc), "truncating 8-bit curve on the sample");
    o.require(rounded.size() == 100 && positive_non_decreasing(rounded), "rounding 8-bit curve on a float image");
    o.detail << " 64x64 identities " << fwd_inv << " / " << polar << "; 8-bit truncation on sample MAE " << trunc.front()
             << " -> " << trunc.back() << " over 100 repeats; 8-bit rounding on float image MAE " << rounded.front()
             << " -> " << rounded.back();
    report("Round trip", o);
}

void swap_phenomenon()
{
    Outcome o;
    const fs::path dir(DMFOUR_SAMPLE_DIR);
    const Tensor low = to_rgb(read_png(dir / "low/astronaut.png"));
    const Tensor gt = to_rgb(read_png(dir / "gt/astronaut.png"));
    const SwapResult a = swap_components(low, gt, SwapComponent::amplitude);
    const SwapResult b = swap_components(low, gt, SwapComponent::phase);
    const double rt = mae(ifft2_real(fft2(gt)), gt);
    const double ma = mae(a.image, gt), mb = mae(b.image, gt);
    o.require(ma > 10.0 * rt, "MAE(I_a, gt) > 10x round trip");
    o.require(mb > 10.0 * rt, "MAE(I_b, gt) > 10x round trip");

    // I_a carries the ground-truth amplitude and the low-light phase; I_b the reverse.
    const PolarField pa = decompose(fft2(a.unclamped));
    const PolarField pb = decompose(fft2(b.unclamped));
    const PolarField pl = decompose(fft2(low));
    const PolarField pg = decompose(fft2(gt));
    double amp = std::max(oracle::max_abs_diff(pa.amplitude, pg.amplitude), oracle::max_abs_diff(pb.amplitude, pl.amplitude));
    double phase = 0.0;
    auto phase_err = [&](const PolarField& got, const PolarField& want) {
        for (std::size_t i = 0; i < got.phase.size(); ++i) {
            // The phase of a vanishing coefficient is not defined.
            if (got.amplitude[i] < 1e-6 || want.amplitude[i] < 1e-6) continue;
            phase = std::max(phase, std::abs(std::remainder(got.phase[i] - want.phase[i], 2.0 * std::numbers::pi)) *
                                        got.amplitude[i]);
        }
    };
    phase_err(pa, pl);
    phase_err(pb, pg);
    o.require(amp < 1e-9, "amplitude provenance");
    o.require(phase < 1e-9, "phase provenance");
    o.detail << " MAE(I_a,gt) " << ma << ", MAE(I_b,gt) " << mb << ", round trip " << rt << " (ratios "
             << ma / rt << ", " << mb / rt << "); provenance amplitude " << amp << ", amplitude-weighted phase "
             << phase;
    report("Fig. 2 phenomenon", o);
}

void equations()
{
    Outcome o;
    const double e4 = luminance_attention_target(Tensor({1}, {0.2}), Tensor({1}, {0.8}))[0];
    o.require(std::abs(e4 - 0.75) < 1e-9, "attention target 0.75");

    const Tensor a = random_tensor({1, 4, 4, 4}, 1, 0.0, 2.0);
    const double e5a = oracle::max_abs_diff(luminance_augment(a, Tensor(a.shape())), scale(a, 1.5));
    const double e5b = std::abs(luminance_augment(Tensor({1}, {2.0}), Tensor({1}, {std::log(3.0)}))[0] - 3.5);
    o.require(e5a < 1e-9, "luminance augment 1.5x");
    o.require(e5b < 1e-9, "luminance augment 3.5");

    double rows = 0.0;
    for (std::uint64_t s = 0; s < 20; ++s) {
        const InfraredAugmentResult r = infrared_augment(random_tensor({2, 6, 4, 4}, s, -3, 3), random_tensor({2, 6, 4, 4}, s + 40, -3, 3));
        for (std::size_t row = 0; row < 12; ++row) {
            double sum = 0.0;
            for (std::size_t k = 0; k < 6; ++k) {
                sum += r.attention[row * 6 + k];
                o.require(r.attention[row * 6 + k] >= 0.0, "non-negative attention");
            }
            rows = std::max(rows, std::abs(sum - 1.0));
        }
    }
    o.require(rows < 1e-9, "row-stochastic attention");

    const Tensor p = random_tensor({2, 1, 5, 5}, 3);
    const double e7 = oracle::max_abs_diff(infrared_augment(p, random_tensor({2, 1, 5, 5}, 4)).p_aug, scale(p, 2.0));
    o.require(e7 < 1e-9, "single-channel attention doubles");

    const Tensor gt = random_tensor({1, 3, 16, 16}, 5, 0, 1);
    const Tensor off = add_scalar(gt, 1.0);
    const Tensor tgt = random_tensor({1, 1, 16, 16}, 6, 0, 1);
    const Tensor pred = add_scalar(tgt, 1.0);
    const double e9 = std::abs(loss_total(off, off, gt, &pred, tgt, {}).total - 1.8);
    o.require(e9 < 1e-9, "weighted loss 1.8");
    o.detail << " attention target |err| " << std::abs(e4 - 0.75) << "; augment " << e5a << ", " << e5b
             << "; attention rows " << rows << "; C=1 " << e7 << "; weighted sum " << e9;
    report("Equation unit tests", o);
}

void gradients()
{
    Outcome o;
    const auto t0 = Clock::now();
    double worst_prim = 0.0;
    std::string worst_name;
    std::size_t n = 0;
    for (const oracle::NamedCheck& c : oracle::primitive_gradient_checks()) {
        ++n;
        if (c.result.rel_error >= worst_prim) {
            worst_prim = c.result.rel_error;
            worst_name = c.name;
        }
        o.require(c.result.rel_error < 1e-4, c.name);
    }
    double worst_e2e = 0.0;
    std::size_t entries = 0;
    for (const oracle::NamedCheck& c : oracle::end_to_end_gradient_checks()) {
        worst_e2e = std::max(worst_e2e, c.result.rel_error);
        entries += c.result.checked;
        o.require(c.result.rel_error < 1e-4, c.name);
    }
    const double secs = seconds_since(t0);
    o.require(secs < 60.0, "runtime");
    o.detail << " " << n << " primitive checks, worst " << worst_prim << " (" << worst_name
             << "); end to end on 2x3x8x8 over " << entries << " entries, worst " << worst_e2e << "; " << secs << " s";
    report("Gradient suite", o);
}

void metrics_oracle()
{
    Outcome o;
    double dp = 0.0, ds = 0.0;
    for (std::uint64_t s = 0; s < 10; ++s) {
        const Tensor a = random_tensor({1, 3, 16, 16}, s, 0, 1);
        const Tensor b = clamp(add(a, random_tensor({1, 3, 16, 16}, s + 100, -0.2, 0.2)), 0.0, 1.0);
        dp = std::max(dp, std::abs(psnr(a, b) - oracle::direct_psnr(a, b)));
        ds = std::max(ds, std::abs(ssim(a, b) - oracle::direct_ssim(a, b)));
        o.require(ssim(a, a) == 1.0, "SSIM(a,a) = 1");
    }
    o.require(dp < 1e-9, "PSNR");
    o.require(ds < 1e-9, "SSIM");
    bool zero_sum = true;
    for (std::uint64_t s = 0; s < 100; ++s) {
        const auto h = hist_diff(random_tensor({1, 3, 9, 9}, s, -0.2, 1.2), random_tensor({1, 3, 9, 9}, s + 7, 0, 1),
                                 1 + s % 64);
        zero_sum = zero_sum && std::accumulate(h.begin(), h.end(), std::int64_t{0}) == 0;
    }
    o.require(zero_sum, "hist_diff sums to zero");
    o.detail << " PSNR max |diff| " << dp << ", SSIM max |diff| " << ds << " on 16x16; SSIM(a,a) exactly 1; "
             << "hist_diff zero-sum on 100 fixtures";
    report("Metrics oracle", o);
}

// -----------------------------------------------------------------------------------------------
// Toy protocol: 16 synthetic 64x64 pairs, seed 7, desk widths, 300 iterations, batch 4, lr 4e-4.

struct ToyRuns {
    fs::path root;
    fs::path data;
    bool ok = false;
    double first_run_seconds = 0.0;
};

ToyRuns toy_runs()
{
    ToyRuns t;
    t.root = oracle::temp_dir("acceptance");
    t.data = t.root / "data";
    if (cli({"gen-synthetic", "--pairs", "16", "--size", "64", "--seed", "7", "--out", t.data.string()}) != 0) {
        return t;
    }
    const TrainConfig cfg;
    write_file_atomic(t.root / "toy.cfg", config_text(cfg));
    const auto t0 = Clock::now();
    const int a = cli({"train", "--config", (t.root / "toy.cfg").string(), "--data", t.data.string(), "--out",
                       (t.root / "run_a").string()});
    t.first_run_seconds = seconds_since(t0);
    const int b = cli({"train", "--config", (t.root / "toy.cfg").string(), "--data", t.data.string(), "--out",
                       (t.root / "run_b").string()});
    t.ok = a == 0 && b == 0;
    return t;
}

void toy_convergence(const ToyRuns& t)
{
    Outcome o;
    o.require(t.ok, "training runs completed");
    if (t.ok) {
        const auto log = read_jsonl(t.root / "run_a/log.jsonl");
        const double first = log.front()["total"].get<double>();
        const double last = log.back()["total"].get<double>();
        const Checkpoint ck = load_checkpoint(t.root / "run_a/checkpoint.bin");
        const DatasetLoad load = load_dataset(t.data);
        double p_low = 0.0, p_s1 = 0.0, p_s2 = 0.0;
        for (const ImagePair& p : load.pairs) {
            const Enhanced e = enhance(ck.model, p.low, p.infrared);
            p_low += psnr(p.low, p.gt);
            p_s1 += psnr(clamp(e.i_s1, 0.0, 1.0), p.gt);
            p_s2 += psnr(clamp(e.i_s2, 0.0, 1.0), p.gt);
        }
        const double n = static_cast<double>(load.pairs.size());
        p_low /= n;
        p_s1 /= n;
        p_s2 /= n;

        // Every parameter must receive a nonzero adjoint; the opening iterations of the same run suffice.
        TrainConfig cfg = ck.config;
        cfg.iters = 10;
        std::size_t silent = 0;
        std::string silent_names;
        {
            const TrainResult r = train(cfg, load.pairs);
            for (std::size_t i = 0; i < r.received_gradient.size(); ++i) {
                if (!r.received_gradient[i]) {
                    ++silent;
                    silent_names += " " + r.parameter_names[i];
                }
            }
        }
        o.require(log.size() == 300, "300 logged iterations");
        o.require(last <= 0.5 * first, "final loss <= 50% of initial");
        o.require(p_s2 - p_low >= 3.0, "PSNR gain >= 3 dB");
        o.require(p_s2 >= p_s1, "stage 2 at least as good as stage 1");
        o.require(silent == 0, "every parameter received a gradient:" + silent_names);
        o.require(t.first_run_seconds < 600.0, "runtime under 10 min");
        o.detail << " loss " << first << " -> " << last << " (ratio " << last / first << "); PSNR low " << p_low
                 << " dB, I_s1 " << p_s1 << " dB, I_s2 " << p_s2 << " dB (gain " << p_s2 - p_low
                 << " dB); parameters without gradient " << silent << "; run time " << t.first_run_seconds << " s";
    }
    report("Toy convergence", o);
}

void determinism(const ToyRuns& t)
{
    Outcome o;
    o.require(t.ok, "training runs completed");
    if (t.ok) {
        const std::string ca = slurp(t.root / "run_a/checkpoint.bin");
        const std::string cb = slurp(t.root / "run_b/checkpoint.bin");
        const std::string la = slurp(t.root / "run_a/log.jsonl");
        const std::string lb = slurp(t.root / "run_b/log.jsonl");
        o.require(!ca.empty() && ca == cb, "checkpoints identical");
        o.require(!la.empty() && la == lb, "logs identical");
        o.detail << " checkpoints " << ca.size() << " bytes identical: " << (ca == cb) << "; logs " << la.size()
                 << " bytes identical: " << (la == lb);
    }
    report("Determinism", o);
}

void ablation_harness(const ToyRuns& t)
{
    Outcome o;
    o.require(t.ok, "toy data and baseline run available");
    if (t.ok) {
        std::vector<std::string> names;
        for (const AblationRun& r : ablation_suite()) {
            if (r.name != "full") names.push_back(r.name);
        }
        std::string only;
        for (const std::string& n : names) only += (only.empty() ? "" : ",") + n;
        const int code = cli({"ablate", "--config", (t.root / "toy.cfg").string(), "--data", t.data.string(), "--out",
                              (t.root / "ablate").string(), "--only", only});
        o.require(code == 0, "ablate command");
        if (code == 0) {
            std::vector<std::string> logs{slurp(t.root / "run_a/log.jsonl")};
            for (const std::string& n : names) {
                const auto lines = read_jsonl(t.root / "ablate" / n / "log.jsonl");
                o.require(lines.size() == 300, n + " completed 300 iterations");
                logs.push_back(slurp(t.root / "ablate" / n / "log.jsonl"));
            }
            bool distinct = true;
            for (std::size_t i = 0; i < logs.size(); ++i)
                for (std::size_t j = i + 1; j < logs.size(); ++j) distinct = distinct && logs[i] != logs[j];
            o.require(distinct, "distinct trajectories");
            o.detail << " toggles";
            for (const auto& s : read_jsonl(t.root / "ablate/summary.jsonl")) {
                o.detail << " " << s["name"].get<std::string>() << " (final loss " << s["final_loss"].get<double>()
                         << ", PSNR " << s["psnr_s2"].get<double>() << " dB)";
            }
            o.detail << "; all " << logs.size() << " trajectories pairwise distinct";
        }
    }

    // Zero weights: both stages reduce to identity maps under every toggle.
    double worst = 0.0;
    Model zero = Model::init(ModelConfig{}, 1);
    zero.for_each_param([](const std::string&, Tensor& p) {
        for (double& v : p.data()) v = 0.0;
    });
    const Tensor x = random_tensor({2, 3, 16, 16}, 9, 0, 1);
    const Tensor ir = random_tensor({2, 1, 16, 16}, 10, 0, 1);
    for (const AblationRun& r : ablation_suite()) {
        const Enhanced e = enhance(zero, x, ir, r.ablation);
        worst = std::max({worst, oracle::max_abs_diff(e.i_s1, x), oracle::max_abs_diff(e.i_s2, x)});
    }
    o.require(worst == 0.0, "zero-weight identity");
    o.detail << "; zero-weight networks reproduce the input exactly under all " << ablation_suite().size()
             << " settings";
    report("Ablation harness", o);
}

} // namespace

int main()
{
    std::cout.precision(6);
    dft_oracle();
    round_trip();
    swap_phenomenon();
    equations();
    gradients();
    metrics_oracle();
    const ToyRuns toy = toy_runs();
    toy_convergence(toy);
    ablation_harness(toy);
    determinism(toy);
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
