#include "dmfour/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <fstream>
#include <sstream>

namespace dmfour {

namespace {

constexpr char kMagic[8] = {'D', 'M', 'F', 'L', 'C', 'K', 'P', 'T'};

template <class U>
void put_le(std::string& out, U v)
{
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
}

class Reader {
public:
    explicit Reader(const std::string& bytes) : bytes_(bytes) {}

    template <class U>
    U le()
    {
        need(sizeof(U));
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) {
            v |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        }
        pos_ += sizeof(U);
        return v;
    }

    std::string take(std::size_t n)
    {
        need(n);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    bool at_end() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const
    {
        if (bytes_.size() - pos_ < n) {
            throw DataError("checkpoint is truncated");
        }
    }

    const std::string& bytes_;
    std::size_t pos_ = 0;
};

} // namespace

std::string serialize_checkpoint(const Model& model, const CheckpointManifest& manifest)
{
    nlohmann::ordered_json j;
    j["version"] = manifest.version;
    j["seed"] = manifest.seed;
    j["iteration"] = manifest.iteration;
    j["config"] = manifest.config;
    const std::string text = j.dump();

    std::string out(kMagic, sizeof kMagic);
    put_le<std::uint32_t>(out, manifest.version);
    put_le<std::uint64_t>(out, text.size());
    out += text;
    std::uint64_t count = 0;
    model.for_each_param([&count](const std::string&, const Tensor&) { ++count; });
    put_le<std::uint64_t>(out, count);
    model.for_each_param([&out](const std::string& name, const Tensor& t) {
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
        for (std::size_t d : t.shape()) {
            put_le<std::uint64_t>(out, d);
        }
        for (double v : t.data()) {
            put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
        }
    });
    return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes)
{
    Reader r(bytes);
    if (r.take(sizeof kMagic) != std::string(kMagic, sizeof kMagic)) {
        throw DataError("not a checkpoint file (bad magic)");
    }
    Checkpoint ck;
    ck.manifest.version = r.le<std::uint32_t>();
    if (ck.manifest.version != kCheckpointVersion) {
        throw DataError("unsupported checkpoint version " + std::to_string(ck.manifest.version));
    }
    const std::string text = r.take(r.le<std::uint64_t>());
    try {
        const nlohmann::json j = nlohmann::json::parse(text);
        ck.manifest.seed = j.at("seed").get<std::uint64_t>();
        ck.manifest.iteration = j.at("iteration").get<std::uint64_t>();
        ck.manifest.config = j.at("config").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint manifest is malformed: ") + e.what());
    }
    try {
        ck.config = parse_config(ck.manifest.config);
    } catch (const ConfigError& e) {
        throw DataError(std::string("checkpoint config is invalid: ") + e.what());
    }
    ck.model = Model::init(ck.config.model, ck.manifest.seed);

    std::uint64_t expected = 0;
    ck.model.for_each_param([&expected](const std::string&, const Tensor&) { ++expected; });
    const std::uint64_t count = r.le<std::uint64_t>();
    if (count != expected) {
        throw DataError("checkpoint has " + std::to_string(count) + " parameter blocks, model expects " +
                        std::to_string(expected));
    }
    ck.model.for_each_param([&r](const std::string& name, Tensor& t) {
        const std::string got = r.take(r.le<std::uint32_t>());
        if (got != name) {
            throw DataError("checkpoint block '" + got + "' found where '" + name + "' was expected");
        }
        Shape shape(r.le<std::uint32_t>());
        for (std::size_t& d : shape) {
            d = r.le<std::uint64_t>();
        }
        if (shape != t.shape()) {
            throw DataError("checkpoint block " + name + " has shape " + shape_str(shape) + ", expected " +
                            shape_str(t.shape()));
        }
        for (double& v : t.data()) {
            v = std::bit_cast<double>(r.le<std::uint64_t>());
        }
    });
    if (!r.at_end()) {
        throw DataError("checkpoint has trailing bytes");
    }
    return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model, const CheckpointManifest& manifest)
{
    write_file_atomic(path, serialize_checkpoint(model, manifest));
}

Checkpoint load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot read checkpoint " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return deserialize_checkpoint(ss.str());
}

} // namespace dmfour
