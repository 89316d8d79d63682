#include "doctest.h"
#include "oracles.hpp"

#include "dmfour/checkpoint.hpp"
#include "dmfour/color.hpp"
#include "dmfour/config.hpp"
#include "dmfour/dataset.hpp"
#include "dmfour/image_io.hpp"

#include <fstream>
#include <sstream>

using namespace dmfour;
namespace fs = std::filesystem;
using oracle::random_tensor;

namespace {

Tensor on_grid(Tensor t)
{
    for (double& v : t.data()) v = std::round(v * 255.0) / 255.0;
    return t;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

} // namespace

TEST_SUITE("io") {

TEST_CASE("8-bit PNG round trip is exact on the 8-bit grid")
{
    const fs::path dir = oracle::temp_dir("png8");
    const Tensor rgb = on_grid(random_tensor({1, 3, 5, 7}, 1, 0, 1));
    write_png(dir / "a.png", rgb);
    CHECK(read_png(dir / "a.png") == rgb);
    const Tensor gray = on_grid(random_tensor({1, 1, 4, 4}, 2, 0, 1));
    write_png(dir / "g.png", gray);
    CHECK(read_png(dir / "g.png") == gray);
}

TEST_CASE("16-bit PNG full scale reads as 1.0")
{
    const fs::path dir = oracle::temp_dir("png16");
    Tensor t({1, 3, 2, 2}, 1.0);
    t[1] = 0.5;
    write_png(dir / "w.png", t, 16);
    const Tensor r = read_png(dir / "w.png");
    CHECK(r[0] == 1.0);
    CHECK(r[1] == 32768.0 / 65535.0);
}

TEST_CASE("writing clamps and reading garbage fails")
{
    const fs::path dir = oracle::temp_dir("pngbad");
    write_png(dir / "c.png", Tensor({1, 1, 1, 2}, {-0.5, 1.7}));
    const Tensor r = read_png(dir / "c.png");
    CHECK(r[0] == 0.0);
    CHECK(r[1] == 1.0);
    write_file_atomic(dir / "bad.png", "not a png");
    CHECK_THROWS_AS(read_png(dir / "bad.png"), DataError);
    CHECK_THROWS_AS(read_png(dir / "missing.png"), DataError);
    CHECK_FALSE(fs::exists(dir / "c.png.tmp"));
}

TEST_CASE("dataset: infrared fallback, unmatched files and size mismatches")
{
    const fs::path dir = oracle::temp_dir("dataset");
    fs::create_directories(dir / "low");
    fs::create_directories(dir / "gt");
    const Tensor img = on_grid(random_tensor({1, 3, 8, 8}, 3, 0, 1));
    write_png(dir / "low/a.png", img);
    write_png(dir / "gt/a.png", img);
    write_png(dir / "low/b.png", img);
    write_png(dir / "gt/b.png", Tensor({1, 3, 8, 6}, 0.5));
    write_png(dir / "low/c.png", img);

    const DatasetLoad load = load_dataset(dir);
    REQUIRE(load.pairs.size() == 1);
    CHECK(load.pairs[0].id == "a");
    CHECK(load.pairs[0].infrared_fallback);
    CHECK(load.pairs[0].infrared == luminance(img));
    std::string all;
    for (const auto& w : load.warnings) all += w + "\n";
    CHECK(all.find("b") != std::string::npos);
    CHECK(all.find("c") != std::string::npos);
    CHECK(load.warnings.size() == 2);
}

TEST_CASE("dataset: infrared images are used when present, empty datasets are an error")
{
    const fs::path dir = oracle::temp_dir("dataset_ir");
    for (const char* s : {"low", "gt", "ir"}) fs::create_directories(dir / s);
    const Tensor img = on_grid(random_tensor({1, 3, 8, 8}, 4, 0, 1));
    const Tensor ir = on_grid(random_tensor({1, 1, 8, 8}, 5, 0, 1));
    write_png(dir / "low/x.png", img);
    write_png(dir / "gt/x.png", img);
    write_png(dir / "ir/x.png", ir);
    const DatasetLoad load = load_dataset(dir);
    REQUIRE(load.pairs.size() == 1);
    CHECK_FALSE(load.pairs[0].infrared_fallback);
    CHECK(load.pairs[0].infrared == ir);

    const fs::path empty = oracle::temp_dir("dataset_empty");
    fs::create_directories(empty / "low");
    fs::create_directories(empty / "gt");
    CHECK_THROWS_AS(load_dataset(empty), DataError);
}

TEST_CASE("synthetic data is seeded and survives a trip through PNG")
{
    SyntheticOptions o;
    o.pairs = 3;
    o.size = 16;
    const auto a = generate_synthetic(o);
    const auto b = generate_synthetic(o);
    REQUIRE(a.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(a[i].low == b[i].low);
        CHECK(a[i].gt == b[i].gt);
        CHECK(mean(a[i].low) < mean(a[i].gt));
    }
    const fs::path dir = oracle::temp_dir("synthetic");
    write_dataset(dir, a);
    const DatasetLoad load = load_dataset(dir);
    REQUIRE(load.pairs.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(load.pairs[i].id == a[i].id);
        CHECK(load.pairs[i].low == a[i].low);
        CHECK(load.pairs[i].gt == a[i].gt);
    }
    o.seed = 8;
    CHECK(generate_synthetic(o)[0].gt != a[0].gt);
}

TEST_CASE("config text round trips exactly")
{
    TrainConfig c;
    c.lr = 1.0 / 3.0;
    c.seed = 123456789012345ULL;
    c.milestones = {0.25, 0.6};
    c.model.stage2_width = 24;
    c.model.leaky_slope = 0.1;
    c.ablation.ffc_path = false;
    c.weights.per = 0.0;
    c.flip = false;
    const TrainConfig d = parse_config(config_text(c));
    CHECK(config_text(d) == config_text(c));
    CHECK(d.lr == c.lr);
    CHECK(d.seed == c.seed);
    CHECK(d.milestones == c.milestones);
    CHECK(d.ablation == c.ablation);
    CHECK(d.model.stage2_width == 24);
    CHECK_FALSE(d.flip);
}

TEST_CASE("config errors")
{
    CHECK_THROWS_AS(parse_config("[training]\nitres = 3\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[nonsense]\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[loss]\nper = -1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[ablation]\nffc_path = maybe\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("crop = 4\n"), ConfigError);
    const TrainConfig c = parse_config("# comment\n[training]\niters = 12 # trailing\n[ablation]\nstage2 = false\n");
    CHECK(c.iters == 12);
    CHECK_FALSE(c.ablation.stage2);
    CHECK(c.crop == 64);
}

TEST_CASE("checkpoint round trip restores every parameter bit for bit")
{
    ModelConfig mc;
    mc.stage2_width = 8;
    const Model m = Model::init(mc, 42);
    TrainConfig cfg;
    cfg.model = mc;
    const CheckpointManifest man{config_text(cfg), 42, 17};
    const fs::path dir = oracle::temp_dir("ckpt");
    save_checkpoint(dir / "c.bin", m, man);
    const Checkpoint ck = load_checkpoint(dir / "c.bin");
    CHECK(ck.manifest.seed == 42);
    CHECK(ck.manifest.iteration == 17);
    CHECK(ck.manifest.version == kCheckpointVersion);
    CHECK(ck.config.model.stage2_width == 8);
    std::vector<std::pair<std::string, Tensor>> a, b;
    m.for_each_param([&](const std::string& n, const Tensor& t) { a.emplace_back(n, t); });
    ck.model.for_each_param([&](const std::string& n, const Tensor& t) { b.emplace_back(n, t); });
    CHECK(a == b);
    CHECK(serialize_checkpoint(ck.model, ck.manifest) == slurp(dir / "c.bin"));
}

TEST_CASE("checkpoint corruption is detected")
{
    const Model m = Model::init(ModelConfig{}, 1);
    const std::string bytes = serialize_checkpoint(m, {config_text(TrainConfig{}), 1, 0});
    CHECK(bytes.substr(0, 8) == "DMFLCKPT");
    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(deserialize_checkpoint(bad_magic), DataError);
    std::string bad_version = bytes;
    bad_version[8] = 9;
    CHECK_THROWS_AS(deserialize_checkpoint(bad_version), DataError);
    CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, bytes.size() - 5)), DataError);
    CHECK_THROWS_AS(deserialize_checkpoint(bytes + "x"), DataError);
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/ckpt.bin"), DataError);
}

} // TEST_SUITE
