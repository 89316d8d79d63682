#include "dmfour/cli.hpp"

#include "dmfour/checkpoint.hpp"
#include "dmfour/color.hpp"
#include "dmfour/config.hpp"
#include "dmfour/dataset.hpp"
#include "dmfour/fourier.hpp"
#include "dmfour/metrics.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#ifndef DMFOUR_VERSION
#define DMFOUR_VERSION "unknown"
#endif

namespace dmfour {

namespace fs = std::filesystem;

namespace {

// FNV-1a over the file bytes; identifies inputs in run manifests.
std::string file_digest(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot read " + path.string());
    }
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char c = 0;
    while (in.get(c)) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

struct NamedImage {
    std::string id;
    fs::path path;
};

// A single PNG, or every PNG in a directory sorted by name.
std::vector<NamedImage> list_images(const fs::path& path)
{
    if (fs::is_regular_file(path)) {
        return {{path.stem().string(), path}};
    }
    if (!fs::is_directory(path)) {
        throw DataError("no such file or directory: " + path.string());
    }
    std::vector<NamedImage> out;
    for (const auto& e : fs::directory_iterator(path)) {
        if (e.is_regular_file() && e.path().extension() == ".png") {
            out.push_back({e.path().stem().string(), e.path()});
        }
    }
    std::sort(out.begin(), out.end(), [](const NamedImage& a, const NamedImage& b) { return a.id < b.id; });
    if (out.empty()) {
        throw DataError("no PNG images in " + path.string());
    }
    return out;
}

Tensor read_rgb(const fs::path& path) { return to_rgb(read_png(path)); }

std::string jsonl(const std::vector<IterationLog>& log)
{
    std::string s;
    for (const IterationLog& e : log) {
        s += e.to_json() + "\n";
    }
    return s;
}

// Writes a raw dump: u64 rank, u64 dims, float64 values, little-endian.
void write_float_dump(const fs::path& path, const Tensor& t)
{
    std::string bytes;
    const auto put = [&bytes](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            bytes.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
        }
    };
    put(t.rank());
    for (std::size_t d : t.shape()) {
        put(d);
    }
    for (double v : t.data()) {
        put(std::bit_cast<std::uint64_t>(v));
    }
    write_file_atomic(path, bytes);
}

nlohmann::ordered_json run_manifest(const std::string& command, const TrainConfig* cfg,
                                    const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs)
{
    nlohmann::ordered_json m;
    m["command"] = command;
    m["version"] = DMFOUR_VERSION;
    if (cfg != nullptr) {
        m["seed"] = cfg->seed;
        m["config"] = config_text(*cfg);
    }
    nlohmann::ordered_json digests = nlohmann::ordered_json::object();
    for (const fs::path& p : inputs) {
        digests[p.string()] = file_digest(p);
    }
    m["inputs"] = digests;
    nlohmann::ordered_json outs = nlohmann::ordered_json::array();
    for (const fs::path& p : outputs) {
        outs.push_back(p.string());
    }
    m["outputs"] = outs;
    return m;
}

std::vector<fs::path> dataset_files(const fs::path& root)
{
    std::vector<fs::path> files;
    for (const char* sub : {"low", "gt", "ir"}) {
        if (fs::is_directory(root / sub)) {
            for (const auto& e : fs::directory_iterator(root / sub)) {
                if (e.is_regular_file() && e.path().extension() == ".png") {
                    files.push_back(e.path());
                }
            }
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

std::vector<ImagePair> load_pairs(const fs::path& root, std::ostream& err)
{
    DatasetLoad load = load_dataset(root);
    for (const std::string& w : load.warnings) {
        err << "warning: " << w << "\n";
    }
    return std::move(load.pairs);
}

struct TrainRunOutput {
    TrainResult result;
    std::vector<fs::path> outputs;
};

TrainRunOutput train_to_dir(const TrainConfig& cfg, const std::vector<ImagePair>& pairs, const fs::path& out_dir)
{
    fs::create_directories(out_dir);
    TrainRunOutput run;
    std::vector<IterationLog> log;
    const fs::path log_path = out_dir / "log.jsonl";
    TrainHooks hooks;
    hooks.on_iteration = [&log](const IterationLog& e) { log.push_back(e); };
    hooks.on_checkpoint = [&](std::size_t iteration, const Model& model) {
        const CheckpointManifest manifest{config_text(cfg), cfg.seed, iteration};
        const bool last = iteration == cfg.iters;
        const fs::path path =
            out_dir / (last ? std::string("checkpoint.bin") : "checkpoint_" + std::to_string(iteration) + ".bin");
        save_checkpoint(path, model, manifest);
        write_file_atomic(log_path, jsonl(log));
        run.outputs.push_back(path);
    };
    run.result = train(cfg, pairs, hooks);
    if (cfg.iters == 0) {
        save_checkpoint(out_dir / "checkpoint.bin", run.result.model, {config_text(cfg), cfg.seed, 0});
        write_file_atomic(log_path, "");
        run.outputs.push_back(out_dir / "checkpoint.bin");
    }
    run.outputs.push_back(log_path);
    return run;
}

double mean_psnr(const Model& model, const std::vector<ImagePair>& pairs, const Ablation& ablation, bool stage1_only)
{
    double total = 0.0;
    for (const ImagePair& p : pairs) {
        const Enhanced e = enhance(model, p.low, p.infrared, ablation);
        total += psnr(clamp(stage1_only ? e.i_s1 : e.i_s2, 0.0, 1.0), p.gt);
    }
    return total / static_cast<double>(pairs.size());
}

// Subcommand option holders.
struct TrainOpts {
    std::string config, data, out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> iters;
};

struct EnhanceOpts {
    std::string checkpoint, input, ir, out;
    bool save_s1 = false;
    bool float_dump = false;
};

struct SwapOpts {
    std::string low, gt, out;
    std::size_t bins = 64;
};

struct RoundtripOpts {
    std::string input, out, quantize = "floor8";
    std::size_t repeats = 100;
};

struct EvalOpts {
    std::string pred, gt, out;
};

struct AblateOpts {
    std::string config, data, out;
    std::vector<std::string> only;
};

struct SynthOpts {
    std::string out;
    SyntheticOptions opt;
};

TrainConfig config_from(const std::string& path)
{
    return path.empty() ? TrainConfig{} : load_config(path);
}

int cmd_train(const TrainOpts& o, std::ostream& out, std::ostream& err)
{
    TrainConfig cfg = config_from(o.config);
    if (o.seed) {
        cfg.seed = *o.seed;
    }
    if (o.iters) {
        cfg.iters = *o.iters;
    }
    const std::vector<ImagePair> pairs = load_pairs(o.data, err);
    TrainRunOutput run = train_to_dir(cfg, pairs, o.out);
    const fs::path manifest_path = fs::path(o.out) / "manifest.json";
    run.outputs.push_back(manifest_path);
    write_file_atomic(manifest_path, run_manifest("train", &cfg, dataset_files(o.data), run.outputs).dump(2) + "\n");
    if (!run.result.log.empty()) {
        out << "initial loss " << run.result.log.front().loss.total << ", final loss "
            << run.result.log.back().loss.total << "\n";
    }
    return kExitOk;
}

int cmd_enhance(const EnhanceOpts& o, std::ostream& out, std::ostream&)
{
    const Checkpoint ck = load_checkpoint(o.checkpoint);
    const fs::path out_dir = o.out;
    fs::create_directories(out_dir);
    std::map<std::string, fs::path> ir;
    if (!o.ir.empty()) {
        for (const NamedImage& n : list_images(o.ir)) {
            ir.emplace(n.id, n.path);
        }
    }
    std::vector<fs::path> inputs{o.checkpoint};
    std::vector<fs::path> outputs;
    for (const NamedImage& n : list_images(o.input)) {
        Tensor low = read_rgb(n.path);
        Tensor infrared;
        inputs.push_back(n.path);
        if (auto it = ir.find(n.id); it != ir.end()) {
            infrared = to_gray(read_png(it->second));
            inputs.push_back(it->second);
        }
        const ImagePair pair = make_pair(n.id, low, low, infrared);
        const Enhanced e = enhance(ck.model, pair.low, pair.infrared, ck.config.ablation);
        if (!e.i_s2.all_finite() || !e.i_s1.all_finite()) {
            throw NumericError("enhance: non-finite output for " + n.id);
        }
        const fs::path p2 = out_dir / (n.id + ".png");
        write_png(p2, e.i_s2);
        outputs.push_back(p2);
        if (o.save_s1) {
            const fs::path p1 = out_dir / (n.id + "_s1.png");
            write_png(p1, e.i_s1);
            outputs.push_back(p1);
        }
        if (o.float_dump) {
            const fs::path d2 = out_dir / (n.id + ".f64");
            write_float_dump(d2, e.i_s2);
            outputs.push_back(d2);
            if (o.save_s1) {
                const fs::path d1 = out_dir / (n.id + "_s1.f64");
                write_float_dump(d1, e.i_s1);
                outputs.push_back(d1);
            }
        }
        out << n.id << " -> " << p2.string() << "\n";
    }
    outputs.push_back(out_dir / "manifest.json");
    write_file_atomic(out_dir / "manifest.json",
                      run_manifest("enhance", &ck.config, inputs, outputs).dump(2) + "\n");
    return kExitOk;
}

int cmd_diagnose_swap(const SwapOpts& o, std::ostream& out, std::ostream&)
{
    const Tensor low = read_rgb(o.low);
    const Tensor gt = read_rgb(o.gt);
    if (low.shape() != gt.shape()) {
        throw DataError("diagnose-swap: " + o.low + " " + shape_str(low.shape()) + " and " + o.gt + " " +
                        shape_str(gt.shape()) + " differ in size");
    }
    const SwapResult a = swap_components(low, gt, SwapComponent::amplitude);
    const SwapResult b = swap_components(low, gt, SwapComponent::phase);
    const Tensor roundtrip = ifft2_real(fft2(gt));

    const fs::path dir = o.out;
    fs::create_directories(dir);
    write_png(dir / "I_a.png", a.image);
    write_png(dir / "I_b.png", b.image);
    write_png(dir / "diff_a.png", diff_map(a.image, gt));
    write_png(dir / "diff_b.png", diff_map(b.image, gt));

    const auto ha = hist_diff(luminance(a.image), luminance(gt), o.bins);
    const auto hb = hist_diff(luminance(b.image), luminance(gt), o.bins);
    std::ostringstream csv;
    csv << "bin,lower,upper,I_a_minus_gt,I_b_minus_gt\n";
    for (std::size_t k = 0; k < o.bins; ++k) {
        csv << k << "," << static_cast<double>(k) / static_cast<double>(o.bins) << ","
            << static_cast<double>(k + 1) / static_cast<double>(o.bins) << "," << ha[k] << "," << hb[k] << "\n";
    }
    write_file_atomic(dir / "hist_diff.csv", csv.str());

    nlohmann::ordered_json r;
    r["mae_I_a_gt"] = mae(a.image, gt);
    r["mae_I_b_gt"] = mae(b.image, gt);
    r["mae_I_a_gt_unclamped"] = mae(a.unclamped, gt);
    r["mae_I_b_gt_unclamped"] = mae(b.unclamped, gt);
    r["mae_roundtrip_gt"] = mae(roundtrip, gt);
    r["mae_low_gt"] = mae(low, gt);
    r["hist_bins"] = o.bins;
    const std::string report = r.dump(2) + "\n";
    write_file_atomic(dir / "report.json", report);
    write_file_atomic(dir / "manifest.json",
                      run_manifest("diagnose-swap", nullptr, {o.low, o.gt},
                                   {dir / "I_a.png", dir / "I_b.png", dir / "diff_a.png", dir / "diff_b.png",
                                    dir / "hist_diff.csv", dir / "report.json"})
                              .dump(2) +
                          "\n");
    out << report;
    return kExitOk;
}

Quantization parse_quantization(const std::string& s)
{
    if (s == "none") {
        return Quantization::none;
    }
    if (s == "round8") {
        return Quantization::round8;
    }
    if (s == "floor8") {
        return Quantization::floor8;
    }
    throw ConfigError("--quantize must be none, round8 or floor8, got '" + s + "'");
}

int cmd_roundtrip(const RoundtripOpts& o, std::ostream& out, std::ostream&)
{
    if (o.repeats == 0) {
        throw ConfigError("--repeats must be at least 1");
    }
    const Quantization q = parse_quantization(o.quantize);
    const Tensor x = read_rgb(o.input);
    const std::vector<double> curve = roundtrip_curve(x, o.repeats, q);
    std::ostringstream csv;
    csv.precision(17);
    csv << "repeat,mae\n";
    for (std::size_t i = 0; i < curve.size(); ++i) {
        csv << i + 1 << "," << curve[i] << "\n";
    }
    if (o.out.empty()) {
        out << csv.str();
    } else {
        write_file_atomic(o.out, csv.str());
        out << "final mae " << curve.back() << "\n";
    }
    return kExitOk;
}

std::string report_line(const std::string& id, const MetricReport& r)
{
    nlohmann::ordered_json j = nlohmann::ordered_json::parse(r.to_json());
    nlohmann::ordered_json line;
    line["id"] = id;
    for (auto& [k, v] : j.items()) {
        line[k] = v;
    }
    return line.dump();
}

int cmd_evaluate(const EvalOpts& o, std::ostream& out, std::ostream& err)
{
    const std::vector<NamedImage> preds = list_images(o.pred);
    const std::vector<NamedImage> gts = list_images(o.gt);
    std::map<std::string, fs::path> gt_by_id;
    for (const NamedImage& g : gts) {
        gt_by_id.emplace(g.id, g.path);
    }
    const bool single = preds.size() == 1 && gts.size() == 1;
    std::string text;
    MetricReport mean_report;
    std::size_t count = 0;
    for (const NamedImage& p : preds) {
        fs::path gt_path;
        if (single) {
            gt_path = gts.front().path;
        } else if (auto it = gt_by_id.find(p.id); it != gt_by_id.end()) {
            gt_path = it->second;
        } else {
            err << "warning: no ground truth for " << p.id << "\n";
            continue;
        }
        const Tensor a = read_rgb(p.path);
        const Tensor b = read_rgb(gt_path);
        if (a.shape() != b.shape()) {
            throw DataError("evaluate: " + p.id + " prediction " + shape_str(a.shape()) + " vs ground truth " +
                            shape_str(b.shape()));
        }
        const MetricReport r = evaluate_pair(a, b);
        text += report_line(p.id, r) + "\n";
        mean_report.psnr_db += r.psnr_db;
        mean_report.ssim += r.ssim;
        mean_report.mae += r.mae;
        ++count;
    }
    if (count == 0) {
        throw DataError("evaluate: no prediction matched a ground-truth image");
    }
    const double n = static_cast<double>(count);
    mean_report.psnr_db /= n;
    mean_report.ssim /= n;
    mean_report.mae /= n;
    text += report_line("mean", mean_report) + "\n";
    if (o.out.empty()) {
        out << text;
    } else {
        write_file_atomic(o.out, text);
    }
    return kExitOk;
}

int cmd_ablate(const AblateOpts& o, std::ostream& out, std::ostream& err)
{
    const TrainConfig base = config_from(o.config);
    const std::vector<ImagePair> pairs = load_pairs(o.data, err);
    std::vector<AblationRun> runs = ablation_suite();
    if (!o.only.empty()) {
        std::vector<AblationRun> chosen;
        for (const std::string& name : o.only) {
            auto it = std::find_if(runs.begin(), runs.end(), [&](const AblationRun& r) { return r.name == name; });
            if (it == runs.end()) {
                throw ConfigError("unknown ablation '" + name + "'");
            }
            chosen.push_back(*it);
        }
        runs = std::move(chosen);
    }
    const fs::path root = o.out;
    fs::create_directories(root);
    std::string summary;
    std::vector<fs::path> outputs;
    for (const AblationRun& run : runs) {
        TrainConfig cfg = base;
        cfg.ablation = run.ablation;
        TrainRunOutput r = train_to_dir(cfg, pairs, root / run.name);
        outputs.insert(outputs.end(), r.outputs.begin(), r.outputs.end());
        nlohmann::ordered_json j;
        j["name"] = run.name;
        j["initial_loss"] = r.result.log.empty() ? 0.0 : r.result.log.front().loss.total;
        j["final_loss"] = r.result.log.empty() ? 0.0 : r.result.log.back().loss.total;
        j["psnr_s1"] = mean_psnr(r.result.model, pairs, cfg.ablation, true);
        j["psnr_s2"] = mean_psnr(r.result.model, pairs, cfg.ablation, false);
        summary += j.dump() + "\n";
        out << j.dump() << "\n";
    }
    write_file_atomic(root / "summary.jsonl", summary);
    outputs.push_back(root / "summary.jsonl");
    write_file_atomic(root / "manifest.json",
                      run_manifest("ablate", &base, dataset_files(o.data), outputs).dump(2) + "\n");
    return kExitOk;
}

int cmd_gen_synthetic(const SynthOpts& o, std::ostream& out, std::ostream&)
{
    const std::vector<ImagePair> pairs = generate_synthetic(o.opt);
    write_dataset(o.out, pairs);
    std::vector<fs::path> outputs = dataset_files(o.out);
    outputs.push_back(fs::path(o.out) / "manifest.json");
    nlohmann::ordered_json m = run_manifest("gen-synthetic", nullptr, {}, outputs);
    m["seed"] = o.opt.seed;
    m["pairs"] = o.opt.pairs;
    m["size"] = o.opt.size;
    write_file_atomic(fs::path(o.out) / "manifest.json", m.dump(2) + "\n");
    out << "wrote " << pairs.size() << " pairs to " << o.out << "\n";
    return kExitOk;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Two-stage Fourier low-light enhancement: training, inference and diagnostics"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(DMFOUR_VERSION));

    TrainOpts train_o;
    CLI::App* train_cmd = app.add_subcommand("train", "Train both stages and write a checkpoint and JSONL log");
    train_cmd->add_option("--config", train_o.config, "Config file (defaults when omitted)")->check(CLI::ExistingFile);
    train_cmd->add_option("--data", train_o.data, "Dataset root with low/, gt/ and optional ir/")->required();
    train_cmd->add_option("--out", train_o.out, "Output directory")->required();
    train_cmd->add_option("--seed", train_o.seed, "Override training.seed");
    train_cmd->add_option("--iters", train_o.iters, "Override training.iters");

    EnhanceOpts enh_o;
    CLI::App* enh_cmd = app.add_subcommand("enhance", "Enhance images with a trained checkpoint");
    enh_cmd->add_option("--checkpoint", enh_o.checkpoint, "Checkpoint file")->required();
    enh_cmd->add_option("--input", enh_o.input, "Low-light PNG or directory of PNGs")->required();
    enh_cmd->add_option("--ir", enh_o.ir, "Infrared PNG or directory matched by name (Y channel fallback)");
    enh_cmd->add_option("--out", enh_o.out, "Output directory")->required();
    enh_cmd->add_flag("--save-s1", enh_o.save_s1, "Also write the first-stage output");
    enh_cmd->add_flag("--float-dump", enh_o.float_dump, "Also write unclamped float64 outputs");

    SwapOpts swap_o;
    CLI::App* swap_cmd =
        app.add_subcommand("diagnose-swap", "Swap amplitude/phase between a low-light image and its ground truth");
    swap_cmd->add_option("--low", swap_o.low, "Low-light PNG")->required();
    swap_cmd->add_option("--gt", swap_o.gt, "Ground-truth PNG")->required();
    swap_cmd->add_option("--out", swap_o.out, "Output directory")->required();
    swap_cmd->add_option("--bins", swap_o.bins, "Histogram bins")->check(CLI::PositiveNumber);

    RoundtripOpts rt_o;
    CLI::App* rt_cmd = app.add_subcommand("roundtrip-loss", "MAE after repeated Fourier round trips");
    rt_cmd->add_option("--input", rt_o.input, "Input PNG")->required();
    rt_cmd->add_option("--repeats", rt_o.repeats, "Number of round trips");
    rt_cmd->add_option("--quantize", rt_o.quantize, "Between repeats: none, round8 or floor8 (truncation, the default)");
    rt_cmd->add_option("--out", rt_o.out, "CSV output (stdout when omitted)");

    EvalOpts eval_o;
    CLI::App* eval_cmd = app.add_subcommand("evaluate", "PSNR, SSIM and MAE against ground truth");
    eval_cmd->add_option("--pred", eval_o.pred, "Prediction PNG or directory")->required();
    eval_cmd->add_option("--gt", eval_o.gt, "Ground-truth PNG or directory")->required();
    eval_cmd->add_option("--out", eval_o.out, "JSONL output (stdout when omitted)");

    AblateOpts abl_o;
    CLI::App* abl_cmd = app.add_subcommand("ablate", "One training run per component toggle");
    abl_cmd->add_option("--config", abl_o.config, "Base config file")->check(CLI::ExistingFile);
    abl_cmd->add_option("--data", abl_o.data, "Dataset root")->required();
    abl_cmd->add_option("--out", abl_o.out, "Output directory")->required();
    abl_cmd->add_option("--only", abl_o.only, "Subset of runs by name")->delimiter(',');

    SynthOpts syn_o;
    CLI::App* syn_cmd = app.add_subcommand("gen-synthetic", "Write a seeded synthetic paired dataset");
    syn_cmd->add_option("--pairs", syn_o.opt.pairs, "Number of pairs")->check(CLI::PositiveNumber);
    syn_cmd->add_option("--size", syn_o.opt.size, "Image side length")->check(CLI::PositiveNumber);
    syn_cmd->add_option("--seed", syn_o.opt.seed, "Generator seed");
    syn_cmd->add_option("--out", syn_o.out, "Output directory")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (train_cmd->parsed()) {
            return cmd_train(train_o, out, err);
        }
        if (enh_cmd->parsed()) {
            return cmd_enhance(enh_o, out, err);
        }
        if (swap_cmd->parsed()) {
            return cmd_diagnose_swap(swap_o, out, err);
        }
        if (rt_cmd->parsed()) {
            return cmd_roundtrip(rt_o, out, err);
        }
        if (eval_cmd->parsed()) {
            return cmd_evaluate(eval_o, out, err);
        }
        if (abl_cmd->parsed()) {
            return cmd_ablate(abl_o, out, err);
        }
        return cmd_gen_synthetic(syn_o, out, err);
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const ShapeError& e) {
        err << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const fs::filesystem_error& e) {
        err << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::invalid_argument& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }
}

} // namespace dmfour
