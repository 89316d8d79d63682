#include "dmfour/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace dmfour {

namespace {

std::string trim(const std::string& s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::string fmt_double(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(const std::string& key, const std::string& v)
{
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    }
    return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& v)
{
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
        throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "1") {
        return true;
    }
    if (v == "false" || v == "0") {
        return false;
    }
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<double> parse_list(const std::string& key, const std::string& v)
{
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) {
            out.push_back(parse_double(key, item));
        }
    }
    return out;
}

// Binds every representable field to a "section.key" name, in canonical order.
struct Field {
    std::string name;
    std::function<void(TrainConfig&, const std::string&)> set;
    std::function<std::string(const TrainConfig&)> get;
};

template <class T>
Field size_field(std::string name, T TrainConfig::*member)
{
    return {name, [=](TrainConfig& c, const std::string& v) { c.*member = static_cast<T>(parse_uint(name, v)); },
            [=](const TrainConfig& c) { return std::to_string(c.*member); }};
}

Field model_size(std::string name, std::size_t ModelConfig::*member)
{
    return {name, [=](TrainConfig& c, const std::string& v) { c.model.*member = parse_uint(name, v); },
            [=](const TrainConfig& c) { return std::to_string(c.model.*member); }};
}

Field model_double(std::string name, double ModelConfig::*member)
{
    return {name, [=](TrainConfig& c, const std::string& v) { c.model.*member = parse_double(name, v); },
            [=](const TrainConfig& c) { return fmt_double(c.model.*member); }};
}

Field ablation_flag(std::string name, bool Ablation::*member)
{
    return {name, [=](TrainConfig& c, const std::string& v) { c.ablation.*member = parse_bool(name, v); },
            [=](const TrainConfig& c) { return std::string(c.ablation.*member ? "true" : "false"); }};
}

Field loss_weight(std::string name, double LossWeights::*member)
{
    return {name,
            [=](TrainConfig& c, const std::string& v) {
                const double w = parse_double(name, v);
                if (w < 0.0) {
                    throw ConfigError(name + ": loss weights must be non-negative");
                }
                c.weights.*member = w;
            },
            [=](const TrainConfig& c) { return fmt_double(c.weights.*member); }};
}

const std::vector<Field>& fields()
{
    static const std::vector<Field> all = [] {
        std::vector<Field> f;
        f.push_back(model_size("model.stage1_width", &ModelConfig::stage1_width));
        f.push_back(model_size("model.stage2_width", &ModelConfig::stage2_width));
        f.push_back(model_size("model.lanet_depth", &ModelConfig::lanet_depth));
        f.push_back(model_size("model.lanet_width", &ModelConfig::lanet_width));
        f.push_back(model_double("model.leaky_slope", &ModelConfig::leaky_slope));
        f.push_back(model_double("model.lum_eps", &ModelConfig::lum_eps));
        f.push_back(model_double("model.lum_clamp_max", &ModelConfig::lum_clamp_max));

        f.push_back(size_field("training.crop", &TrainConfig::crop));
        f.push_back(size_field("training.batch", &TrainConfig::batch));
        f.push_back({"training.lr", [](TrainConfig& c, const std::string& v) { c.lr = parse_double("training.lr", v); },
                     [](const TrainConfig& c) { return fmt_double(c.lr); }});
        f.push_back(size_field("training.iters", &TrainConfig::iters));
        f.push_back(size_field("training.seed", &TrainConfig::seed));
        f.push_back({"training.milestones",
                     [](TrainConfig& c, const std::string& v) { c.milestones = parse_list("training.milestones", v); },
                     [](const TrainConfig& c) {
                         std::string s;
                         for (std::size_t i = 0; i < c.milestones.size(); ++i) {
                             s += (i ? ", " : "") + fmt_double(c.milestones[i]);
                         }
                         return s;
                     }});
        f.push_back({"training.lr_gamma",
                     [](TrainConfig& c, const std::string& v) { c.lr_gamma = parse_double("training.lr_gamma", v); },
                     [](const TrainConfig& c) { return fmt_double(c.lr_gamma); }});
        f.push_back({"training.flip",
                     [](TrainConfig& c, const std::string& v) { c.flip = parse_bool("training.flip", v); },
                     [](const TrainConfig& c) { return std::string(c.flip ? "true" : "false"); }});
        f.push_back(size_field("training.checkpoint_every", &TrainConfig::checkpoint_every));

        f.push_back(ablation_flag("ablation.luminance_branch", &Ablation::luminance_branch));
        f.push_back(ablation_flag("ablation.infrared_branch", &Ablation::infrared_branch));
        f.push_back(ablation_flag("ablation.luminance_augment", &Ablation::luminance_augment));
        f.push_back(ablation_flag("ablation.infrared_augment", &Ablation::infrared_augment));
        f.push_back(ablation_flag("ablation.ffc_path", &Ablation::ffc_path));
        f.push_back(ablation_flag("ablation.multiscale_path", &Ablation::multiscale_path));
        f.push_back(ablation_flag("ablation.stage1", &Ablation::stage1));
        f.push_back(ablation_flag("ablation.stage2", &Ablation::stage2));

        f.push_back(loss_weight("loss.s1", &LossWeights::s1));
        f.push_back(loss_weight("loss.s2", &LossWeights::s2));
        f.push_back(loss_weight("loss.per", &LossWeights::per));
        f.push_back(loss_weight("loss.lum", &LossWeights::lum));
        return f;
    }();
    return all;
}

} // namespace

TrainConfig parse_config(const std::string& text)
{
    std::map<std::string, const Field*> by_name;
    for (const Field& f : fields()) {
        by_name.emplace(f.name, &f);
    }
    TrainConfig cfg;
    std::string section;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const std::string where = "line " + std::to_string(line_no) + ": ";
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError(where + "unterminated section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            if (section != "model" && section != "training" && section != "ablation" && section != "loss") {
                throw ConfigError(where + "unknown section [" + section + "]");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(where + "expected key = value");
        }
        if (section.empty()) {
            throw ConfigError(where + "key outside of a section");
        }
        const std::string key = section + "." + trim(line.substr(0, eq));
        const auto it = by_name.find(key);
        if (it == by_name.end()) {
            throw ConfigError(where + "unknown key " + key);
        }
        try {
            it->second->set(cfg, trim(line.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        }
    }
    if (cfg.crop == 0 || cfg.batch == 0) {
        throw ConfigError("training.crop and training.batch must be positive");
    }
    return cfg;
}

TrainConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config file " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string config_text(const TrainConfig& cfg)
{
    std::string out;
    std::string section;
    for (const Field& f : fields()) {
        const auto dot = f.name.find('.');
        const std::string s = f.name.substr(0, dot);
        if (s != section) {
            out += (section.empty() ? "[" : "\n[") + s + "]\n";
            section = s;
        }
        out += f.name.substr(dot + 1) + " = " + f.get(cfg) + "\n";
    }
    return out;
}

} // namespace dmfour
