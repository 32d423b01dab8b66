#include "davsn/runconfig.h"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace fs = std::filesystem;

namespace davsn::cli {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct Field {
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw UsageError("config key '" + key + "': cannot parse '" + v + "' as a number");
    }
}

int64_t parse_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const long long d = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw UsageError("config key '" + key + "': cannot parse '" + v + "' as an integer");
    }
}

uint64_t parse_uint(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const unsigned long long d = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw UsageError("config key '" + key + "': cannot parse '" + v + "' as an unsigned integer");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw UsageError("config key '" + key + "': cannot parse '" + v + "' as a boolean (use 0/1)");
}

#define FIELD_D(name)                                                                        \
    {#name, Field{[](const RunConfig& c) { return fmt_double(c.name); },                     \
                  [](RunConfig& c, const std::string& v) { c.name = parse_double(#name, v); }}}
#define FIELD_I(name)                                                                        \
    {#name, Field{[](const RunConfig& c) { return std::to_string(c.name); },                 \
                  [](RunConfig& c, const std::string& v) {                                   \
                      c.name = static_cast<decltype(c.name)>(parse_int(#name, v));            \
                  }}}
#define FIELD_U(name)                                                                        \
    {#name, Field{[](const RunConfig& c) { return std::to_string(c.name); },                 \
                  [](RunConfig& c, const std::string& v) { c.name = parse_uint(#name, v); }}}
#define FIELD_B(name)                                                                        \
    {#name, Field{[](const RunConfig& c) { return c.name ? std::string("1") : std::string("0"); }, \
                  [](RunConfig& c, const std::string& v) { c.name = parse_bool(#name, v); }}}
#define FIELD_S(name)                                                                        \
    {#name, Field{[](const RunConfig& c) { return c.name; },                                 \
                  [](RunConfig& c, const std::string& v) { c.name = v; }}}

// Insertion order here is the canonical serialization order.
const std::vector<std::pair<std::string, Field>>& field_table() {
    static const std::vector<std::pair<std::string, Field>> table = {
        FIELD_S(mode),
        FIELD_D(lambda_sa),
        FIELD_D(lambda_wd),
        FIELD_D(lambda_u),
        FIELD_D(lr0),
        FIELD_D(disc_lr0),
        FIELD_I(total_steps),
        FIELD_D(poly_power),
        FIELD_D(momentum),
        FIELD_D(weight_decay),
        FIELD_I(batch_source),
        FIELD_I(batch_target),
        FIELD_U(seed),
        FIELD_S(flow_source),
        FIELD_B(gan_saturating),
        FIELD_I(itcr_frame_gap),
        FIELD_D(tau_occ),
        FIELD_I(num_classes),
        FIELD_I(base_channels),
        FIELD_I(num_down_levels),
        FIELD_B(shared_branches),
        FIELD_I(disc_base_channels),
        FIELD_I(disc_num_layers),
        FIELD_B(disc_patch_scores),
        FIELD_S(source_dir),
        FIELD_S(target_dir),
        FIELD_S(eval_dir),
        FIELD_S(out_dir),
        FIELD_I(eval_every),
        FIELD_I(ckpt_every),
        FIELD_S(resume_from),
        FIELD_I(gen_height),
        FIELD_I(gen_width),
        FIELD_I(gen_frames),
        FIELD_I(gen_objects),
        FIELD_I(gen_clips_source),
        FIELD_I(gen_clips_target),
        FIELD_I(gen_clips_eval),
        FIELD_U(gen_seed_source),
        FIELD_U(gen_seed_target),
        FIELD_U(gen_seed_eval),
        FIELD_D(gen_max_speed),
        FIELD_B(gen_integer_velocities),
        FIELD_I(gen_source_texture),
        FIELD_I(gen_target_texture),
        FIELD_D(gen_source_brightness),
        FIELD_D(gen_target_brightness),
        FIELD_D(gen_source_hue),
        FIELD_D(gen_target_hue),
        FIELD_D(gen_source_noise),
        FIELD_D(gen_target_noise),
        FIELD_S(ablate_modes),
        FIELD_S(ablate_seeds),
        FIELD_I(ablate_jobs),
    };
    return table;
}

#undef FIELD_D
#undef FIELD_I
#undef FIELD_U
#undef FIELD_B
#undef FIELD_S

const Field* find_field(const std::string& key) {
    for (const auto& [k, f] : field_table())
        if (k == key) return &f;
    return nullptr;
}

} // namespace

trainer::TrainConfig RunConfig::to_train_config() const {
    trainer::TrainConfig c;
    c.mode = trainer::mode_from_name(mode);
    c.lambda_sa = lambda_sa;
    c.lambda_wd = lambda_wd;
    c.lambda_u = lambda_u;
    c.lr0 = lr0;
    c.disc_lr0 = disc_lr0;
    c.total_steps = total_steps;
    c.poly_power = poly_power;
    c.momentum = momentum;
    c.weight_decay = weight_decay;
    c.batch_source = batch_source;
    c.batch_target = batch_target;
    c.seed = seed;
    if (flow_source == "oracle")
        c.flow_source = trainer::FlowSource::Oracle;
    else if (flow_source == "estimated")
        c.flow_source = trainer::FlowSource::Estimated;
    else
        throw UsageError("flow_source must be 'oracle' or 'estimated', got '" + flow_source + "'");
    c.gan_saturating = gan_saturating;
    c.itcr_frame_gap = itcr_frame_gap;
    c.tau_occ = tau_occ;
    c.seg.num_classes = num_classes;
    c.seg.base_channels = base_channels;
    c.seg.num_down_levels = num_down_levels;
    c.seg.shared_branches = shared_branches;
    c.disc_base_channels = disc_base_channels;
    c.disc_num_layers = disc_num_layers;
    c.disc_patch_scores = disc_patch_scores;
    return c;
}

synthdata::DomainShift RunConfig::source_shift(uint64_t noise_seed) const {
    synthdata::DomainShift s;
    s.hue_shift = gen_source_hue;
    s.brightness_gain = gen_source_brightness;
    s.noise_std = gen_source_noise;
    s.texture_id = gen_source_texture;
    s.noise_seed = noise_seed;
    return s;
}

synthdata::DomainShift RunConfig::target_shift(uint64_t noise_seed) const {
    synthdata::DomainShift s;
    s.hue_shift = gen_target_hue;
    s.brightness_gain = gen_target_brightness;
    s.noise_std = gen_target_noise;
    s.texture_id = gen_target_texture;
    s.noise_seed = noise_seed;
    return s;
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const Field* f = find_field(key);
        if (!f) throw UsageError("unknown config key '" + key + "'");
        f->set(cfg, value);
    }
    return cfg;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("config file not found: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str());
}

void apply_overrides(RunConfig& cfg, const std::vector<std::string>& overrides) {
    for (const auto& ov : overrides) {
        const size_t eq = ov.find('=');
        if (eq == std::string::npos) throw UsageError("override '" + ov + "' must be key=value");
        const std::string key = trim(ov.substr(0, eq));
        const std::string value = trim(ov.substr(eq + 1));
        const Field* f = find_field(key);
        if (!f) throw UsageError("unknown config key '" + key + "'");
        f->set(cfg, value);
    }
}

std::string serialize_config(const RunConfig& cfg) {
    std::ostringstream os;
    for (const auto& [k, f] : field_table()) os << k << " = " << f.get(cfg) << "\n";
    return os.str();
}

void write_config_echo(const RunConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    const fs::path p = fs::path(out_dir) / "config_used.cfg";
    std::ofstream f(p);
    if (!f) throw DataError("cannot write config echo: " + p.string());
    f << serialize_config(cfg);
}

} // namespace davsn::cli
