#include "doctest.h"
#include "oracles.hpp"

#include "dmfour/checkpoint.hpp"
#include "dmfour/cli.hpp"
#include "dmfour/dataset.hpp"
#include "dmfour/fourier.hpp"
#include "dmfour/image_io.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

using namespace dmfour;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run cli(std::vector<std::string> args)
{
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::string> lines(const std::string& text)
{
    std::vector<std::string> v;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) v.push_back(l);
    return v;
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("help and usage errors")
{
    CHECK(cli({"--help"}).code == kExitOk);
    CHECK(cli({}).code == kExitUsage);
    CHECK(cli({"train"}).code == kExitUsage);
    CHECK(cli({"frobnicate"}).code == kExitUsage);
    CHECK(cli({"roundtrip-loss", "--input", "x.png", "--quantize", "round3"}).code != kExitOk);
}

TEST_CASE("gen-synthetic is byte-for-byte reproducible")
{
    const fs::path a = oracle::temp_dir("gen_a"), b = oracle::temp_dir("gen_b");
    const std::vector<std::string> common{"gen-synthetic", "--pairs", "16", "--size", "64", "--seed", "7", "--out"};
    auto args_a = common, args_b = common;
    args_a.push_back(a.string());
    args_b.push_back(b.string());
    REQUIRE(cli(args_a).code == kExitOk);
    REQUIRE(cli(args_b).code == kExitOk);
    std::size_t files = 0;
    for (const auto& e : fs::recursive_directory_iterator(a)) {
        if (!e.is_regular_file() || e.path().filename() == "manifest.json") continue;
        const fs::path rel = fs::relative(e.path(), a);
        CAPTURE(rel.string());
        CHECK(slurp(e.path()) == slurp(b / rel));
        ++files;
    }
    CHECK(files == 32);
}

TEST_CASE("evaluate on ground truth against itself")
{
    const fs::path dir = oracle::temp_dir("eval");
    write_png(dir / "gt.png", oracle::random_tensor({1, 3, 16, 16}, 1, 0, 1));
    const Run r = cli({"evaluate", "--pred", (dir / "gt.png").string(), "--gt", (dir / "gt.png").string(), "--out",
                       (dir / "report.jsonl").string()});
    REQUIRE(r.code == kExitOk);
    const auto ls = lines(slurp(dir / "report.jsonl"));
    REQUIRE(ls.size() == 2);
    const auto j = nlohmann::json::parse(ls[0]);
    CHECK(j["psnr_db"] == "inf");
    CHECK(j["ssim"].get<double>() == 1.0);
    CHECK(j["mae"].get<double>() == 0.0);
}

TEST_CASE("diagnose-swap on identical images and its artifacts")
{
    const fs::path dir = oracle::temp_dir("swap");
    write_png(dir / "img.png", oracle::random_tensor({1, 3, 24, 20}, 2, 0, 1));
    const Run r = cli({"diagnose-swap", "--low", (dir / "img.png").string(), "--gt", (dir / "img.png").string(),
                       "--out", (dir / "out").string()});
    REQUIRE(r.code == kExitOk);
    for (const char* f : {"I_a.png", "I_b.png", "diff_a.png", "diff_b.png", "hist_diff.csv", "report.json",
                          "manifest.json"}) {
        CAPTURE(f);
        CHECK(fs::exists(dir / "out" / f));
    }
    const auto rep = nlohmann::json::parse(slurp(dir / "out/report.json"));
    CHECK(rep["mae_I_a_gt"].get<double>() < 1e-6);
    CHECK(rep["mae_I_b_gt"].get<double>() < 1e-6);
    const auto man = nlohmann::json::parse(slurp(dir / "out/manifest.json"));
    CHECK(man["command"] == "diagnose-swap");
    CHECK(man["outputs"].size() >= 6);
}

TEST_CASE("roundtrip-loss writes one CSV row per repeat")
{
    const fs::path dir = oracle::temp_dir("rt");
    write_png(dir / "img.png", oracle::random_tensor({1, 3, 16, 16}, 3, 0, 1));
    REQUIRE(cli({"roundtrip-loss", "--input", (dir / "img.png").string(), "--repeats", "7", "--out",
                 (dir / "rt.csv").string()})
                .code == kExitOk);
    const auto ls = lines(slurp(dir / "rt.csv"));
    CHECK(ls.size() == 8);
    CHECK(ls[0] == "repeat,mae");
}

TEST_CASE("missing inputs map to the data exit code")
{
    CHECK(cli({"evaluate", "--pred", "/nonexistent/a.png", "--gt", "/nonexistent/b.png"}).code == kExitData);
    const fs::path dir = oracle::temp_dir("missing");
    CHECK(cli({"enhance", "--checkpoint", (dir / "none.bin").string(), "--input", dir.string(), "--out",
               (dir / "o").string()})
              .code == kExitData);
    CHECK(cli({"train", "--data", (dir / "nothing").string(), "--out", (dir / "o").string()}).code == kExitData);
}

TEST_CASE("config errors map to the usage exit code")
{
    const fs::path dir = oracle::temp_dir("badcfg");
    {
        std::ofstream(dir / "bad.cfg") << "[ablation]\nno_such_toggle = true\n";
    }
    const Run r = cli({"train", "--config", (dir / "bad.cfg").string(), "--data", dir.string(), "--out",
                       (dir / "o").string()});
    CHECK(r.code == kExitUsage);
    CHECK(r.err.find("no_such_toggle") != std::string::npos);
}

TEST_CASE("train then enhance")
{
    const fs::path dir = oracle::temp_dir("train");
    REQUIRE(cli({"gen-synthetic", "--pairs", "2", "--size", "16", "--seed", "3", "--out", (dir / "data").string()})
                .code == kExitOk);
    {
        std::ofstream(dir / "t.cfg") << "[model]\nstage1_width = 4\nstage2_width = 8\n[training]\ncrop = 16\n"
                                        "batch = 1\niters = 3\ncheckpoint_every = 2\n";
    }
    const Run t = cli({"train", "--config", (dir / "t.cfg").string(), "--data", (dir / "data").string(), "--out",
                       (dir / "run").string()});
    REQUIRE(t.code == kExitOk);
    CHECK(fs::exists(dir / "run/checkpoint.bin"));
    CHECK(fs::exists(dir / "run/checkpoint_2.bin"));
    CHECK(lines(slurp(dir / "run/log.jsonl")).size() == 3);
    const auto man = nlohmann::json::parse(slurp(dir / "run/manifest.json"));
    CHECK(man["seed"] == 7);
    CHECK(man["inputs"].size() == 4);
    CHECK(load_checkpoint(dir / "run/checkpoint.bin").manifest.iteration == 3);

    const Run e = cli({"enhance", "--checkpoint", (dir / "run/checkpoint.bin").string(), "--input",
                       (dir / "data/low").string(), "--out", (dir / "enh").string(), "--save-s1", "--float-dump"});
    REQUIRE(e.code == kExitOk);
    for (const char* f : {"pair_000.png", "pair_000_s1.png", "pair_000.f64", "pair_001.png", "manifest.json"}) {
        CAPTURE(f);
        CHECK(fs::exists(dir / "enh" / f));
    }
    CHECK(slurp(dir / "enh/pair_000.f64").size() == 8 + 4 * 8 + 3 * 16 * 16 * 8);
}

TEST_CASE("enhance with a pass-through configuration stays within one level of the Fourier round trip")
{
    const fs::path dir = oracle::temp_dir("identity");
    TrainConfig cfg;
    cfg.model.leaky_slope = 1.0;
    Model m = Model::init(cfg.model, 5);
    m.stage1.entry_proj = ConvSpec::identity(3, cfg.model.stage1_width);
    for (FourierComponent& c : m.stage1.components) {
        c.amp_conv = ConvSpec::identity(cfg.model.stage1_width, cfg.model.stage1_width);
        c.pha_conv = ConvSpec::identity(cfg.model.stage1_width, cfg.model.stage1_width);
    }
    zero_conv(m.stage1.exit_proj);
    m.stage2.for_each_param([](const std::string&, Tensor& t) {
        for (double& v : t.data()) v = 0.0;
    });
    save_checkpoint(dir / "id.bin", m, {config_text(cfg), 5, 0});
    const Tensor img = oracle::random_tensor({1, 3, 32, 32}, 6, 0, 1);
    write_png(dir / "in.png", img);
    REQUIRE(cli({"enhance", "--checkpoint", (dir / "id.bin").string(), "--input", (dir / "in.png").string(), "--out",
                 (dir / "out").string()})
                .code == kExitOk);
    const Tensor input = read_png(dir / "in.png");
    const Tensor out = read_png(dir / "out/in.png");
    const Tensor roundtrip = ifft2_real(fft2(input));
    CHECK(oracle::max_abs_diff(out, roundtrip) <= 1.0 / 255.0);
}

} // TEST_SUITE
