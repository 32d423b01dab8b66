#include "davsn/synthdata.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "davsn/array_io.h"
#include "davsn/rng.h"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace davsn::synthdata {

std::string domain_name(Domain d) { return d == Domain::Source ? "source" : "target"; }

Domain domain_from_name(const std::string& s) {
    if (s == "source") return Domain::Source;
    if (s == "target") return Domain::Target;
    throw DataError("unknown domain tag '" + s + "'");
}

void ClipSpec::validate() const {
    if (height < 16 || width < 16)
        throw DataError("clip spec rejects H or W < 16 (got " + std::to_string(height) + "x" +
                        std::to_string(width) + ")");
    if (num_frames < 3) throw DataError("clip spec requires num_frames >= 3");
    if (num_classes < 2) throw DataError("clip spec requires num_classes >= 2");
    if (num_objects < 0) throw DataError("clip spec requires num_objects >= 0");
    if (!motion.velocities.empty() && static_cast<int>(motion.velocities.size()) != num_objects)
        throw DataError("explicit velocity list must match num_objects");
}

bool VideoClip::operator==(const VideoClip& o) const {
    auto teq = [](const Tensor& a, const Tensor& b) {
        return a.dims() == b.dims() &&
               std::memcmp(a.data(), b.data(), static_cast<size_t>(a.size()) * sizeof(double)) == 0;
    };
    if (height != o.height || width != o.width || num_frames != o.num_frames ||
        num_classes != o.num_classes || domain != o.domain || texture_id != o.texture_id)
        return false;
    if (frames.size() != o.frames.size() || labels.size() != o.labels.size() ||
        flows_fwd.size() != o.flows_fwd.size() || flows_bwd.size() != o.flows_bwd.size() ||
        occlusion.size() != o.occlusion.size())
        return false;
    for (size_t i = 0; i < frames.size(); ++i)
        if (!teq(frames[i], o.frames[i])) return false;
    for (size_t i = 0; i < labels.size(); ++i)
        if (labels[i].v != o.labels[i].v) return false;
    for (size_t i = 0; i < flows_fwd.size(); ++i)
        if (!teq(flows_fwd[i].data, o.flows_fwd[i].data) ||
            flows_fwd[i].direction != o.flows_fwd[i].direction)
            return false;
    for (size_t i = 0; i < flows_bwd.size(); ++i)
        if (!teq(flows_bwd[i].data, o.flows_bwd[i].data) ||
            flows_bwd[i].direction != o.flows_bwd[i].direction)
            return false;
    for (size_t i = 0; i < occlusion.size(); ++i)
        if (occlusion[i].v != o.occlusion[i].v) return false;
    return true;
}

// ---- scene model ----

namespace {

enum class ShapeKind { Ellipse, Rectangle, Triangle };

struct SceneObject {
    int class_id = 1;
    ShapeKind kind = ShapeKind::Ellipse;
    double cx = 0, cy = 0;   // center at frame 0
    double vx = 0, vy = 0;   // pixels/frame
    double rx = 8, ry = 8;   // half extents
    std::array<double, 3> color{0.5, 0.5, 0.5};
    double pattern_freq = 0.5;
    double pattern_amp = 0.12;
};

const std::array<std::array<double, 3>, 12> kClassPalette = {{
    {0.85, 0.25, 0.25},
    {0.25, 0.65, 0.90},
    {0.95, 0.80, 0.25},
    {0.45, 0.80, 0.35},
    {0.75, 0.40, 0.85},
    {0.95, 0.55, 0.20},
    {0.30, 0.85, 0.75},
    {0.80, 0.30, 0.55},
    {0.55, 0.55, 0.95},
    {0.65, 0.75, 0.30},
    {0.90, 0.45, 0.45},
    {0.35, 0.45, 0.75},
}};

bool contains(const SceneObject& o, double t, double x, double y) {
    const double lx = x - (o.cx + o.vx * t);
    const double ly = y - (o.cy + o.vy * t);
    switch (o.kind) {
        case ShapeKind::Ellipse: {
            const double u = lx / o.rx, v = ly / o.ry;
            return u * u + v * v <= 1.0;
        }
        case ShapeKind::Rectangle:
            return std::fabs(lx) <= o.rx && std::fabs(ly) <= o.ry;
        case ShapeKind::Triangle: {
            // isoceles, apex up: (0,-ry), (-rx,+ry), (+rx,+ry)
            if (ly < -o.ry || ly > o.ry) return false;
            const double half_width = o.rx * (ly + o.ry) / (2.0 * o.ry);
            return std::fabs(lx) <= half_width;
        }
    }
    return false;
}

// topmost object index containing (x,y) at time t; -1 = background
int owner_at(const std::vector<SceneObject>& objs, double t, double x, double y) {
    for (int i = static_cast<int>(objs.size()) - 1; i >= 0; --i)
        if (contains(objs[static_cast<size_t>(i)], t, x, y)) return i;
    return -1;
}

int class_at(const std::vector<SceneObject>& objs, double t, double x, double y) {
    const int o = owner_at(objs, t, x, y);
    return o < 0 ? 0 : objs[static_cast<size_t>(o)].class_id;
}

std::array<double, 3> object_color(const SceneObject& o, double t, double x, double y) {
    const double lx = x - (o.cx + o.vx * t);
    const double ly = y - (o.cy + o.vy * t);
    const double shade =
        1.0 + o.pattern_amp * std::sin(o.pattern_freq * lx) * std::sin(o.pattern_freq * ly * 1.3 + 0.7);
    return {o.color[0] * shade, o.color[1] * shade, o.color[2] * shade};
}

inline double unit_hash(uint64_t a, uint64_t b, uint64_t c) {
    uint64_t h = a * 0x9E3779B97F4A7C15ull ^ b * 0xC2B2AE3D27D4EB4Full ^ c * 0x165667B19E3779F9ull;
    h ^= h >> 33;
    h *= 0xFF51AFD7ED558CCDull;
    h ^= h >> 33;
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

inline double to_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

std::vector<SceneObject> sample_objects(const ClipSpec& spec, Rng& rng) {
    std::vector<SceneObject> objs;
    objs.reserve(static_cast<size_t>(spec.num_objects));
    const double minside = std::min(spec.height, spec.width);
    for (int i = 0; i < spec.num_objects; ++i) {
        SceneObject o;
        o.class_id = 1 + (i % (spec.num_classes - 1));
        o.kind = static_cast<ShapeKind>((o.class_id - 1) % 3);
        o.cx = rng.uniform(0.15 * spec.width, 0.85 * spec.width);
        o.cy = rng.uniform(0.15 * spec.height, 0.85 * spec.height);
        o.rx = rng.uniform(minside * 0.10, minside * 0.28);
        o.ry = rng.uniform(minside * 0.10, minside * 0.28);
        if (!spec.motion.velocities.empty()) {
            o.vx = spec.motion.velocities[static_cast<size_t>(i)][0];
            o.vy = spec.motion.velocities[static_cast<size_t>(i)][1];
        } else {
            o.vx = rng.uniform(-spec.motion.max_speed, spec.motion.max_speed);
            o.vy = rng.uniform(-spec.motion.max_speed, spec.motion.max_speed);
            if (spec.motion.integer_velocities) {
                o.vx = std::round(o.vx);
                o.vy = std::round(o.vy);
            }
        }
        const auto& base = kClassPalette[static_cast<size_t>((o.class_id - 1) % 12)];
        for (int c = 0; c < 3; ++c) o.color[static_cast<size_t>(c)] = base[static_cast<size_t>(c)] * rng.uniform(0.9, 1.1);
        o.pattern_freq = rng.uniform(0.35, 0.8);
        o.pattern_amp = rng.uniform(0.08, 0.16);
        objs.push_back(o);
    }
    return objs;
}

} // namespace

std::array<double, 3> background_texture(int texture_id, int x, int y) {
    const double fx = x, fy = y;
    switch (texture_id % 4) {
        case 0: {
            const double a = 0.5 + 0.08 * std::sin(0.11 * fx + 0.07 * fy) + 0.05 * std::sin(0.37 * fx) +
                             0.04 * (unit_hash(0, static_cast<uint64_t>(x), static_cast<uint64_t>(y)) - 0.5);
            return {0.42 + 0.5 * (a - 0.5), 0.45 + 0.4 * (a - 0.5), 0.52 + 0.3 * (a - 0.5)};
        }
        case 1: {
            const double s = std::sin(0.45 * fx) * std::sin(0.45 * fy);
            const double a = 0.5 + 0.10 * s +
                             0.05 * (unit_hash(1, static_cast<uint64_t>(x), static_cast<uint64_t>(y)) - 0.5);
            return {0.35 + 0.3 * a, 0.30 + 0.25 * a, 0.22 + 0.2 * a};
        }
        case 2: {
            const double n = unit_hash(2, static_cast<uint64_t>(x / 3), static_cast<uint64_t>(y / 3));
            const double a = 0.35 + 0.25 * n + 0.06 * std::sin(0.2 * (fx + fy));
            return {0.25 + 0.35 * a, 0.35 + 0.3 * a, 0.28 + 0.25 * a};
        }
        default: {
            const double g = fx / 256.0;
            const double stripes = 0.06 * std::sin(0.9 * fy);
            const double a = 0.40 + 0.2 * g + stripes +
                             0.04 * (unit_hash(3, static_cast<uint64_t>(x), static_cast<uint64_t>(y)) - 0.5);
            return {0.5 * a + 0.25, 0.45 * a + 0.22, 0.6 * a + 0.18};
        }
    }
}

VideoClip generate_clip(const ClipSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const auto objs = sample_objects(spec, rng);
    const int H = spec.height, W = spec.width, T = spec.num_frames;
    const int64_t hw = static_cast<int64_t>(H) * W;

    VideoClip clip;
    clip.height = H;
    clip.width = W;
    clip.num_frames = T;
    clip.num_classes = spec.num_classes;
    clip.domain = spec.domain;
    clip.texture_id = 0;

    clip.frames.reserve(static_cast<size_t>(T));
    clip.labels.reserve(static_cast<size_t>(T));
    for (int t = 0; t < T; ++t) {
        Tensor frame({3, H, W});
        LabelMap lab(H, W, 0);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const int64_t p = static_cast<int64_t>(y) * W + x;
                const int o = owner_at(objs, t, x, y);
                std::array<double, 3> rgb;
                if (o < 0) {
                    rgb = background_texture(clip.texture_id, x, y);
                } else {
                    rgb = object_color(objs[static_cast<size_t>(o)], t, x, y);
                    lab.v[static_cast<size_t>(p)] = static_cast<uint8_t>(objs[static_cast<size_t>(o)].class_id);
                }
                for (int c = 0; c < 3; ++c)
                    frame[c * hw + p] = to_f32(std::min(1.0, std::max(0.0, rgb[static_cast<size_t>(c)])));
            }
        clip.frames.push_back(std::move(frame));
        clip.labels.push_back(std::move(lab));
    }

    for (int t = 0; t + 1 < T; ++t) {
        auto fwd = flowwarp::FlowField::zero(H, W, flowwarp::FlowDirection::Forward);
        auto bwd = flowwarp::FlowField::zero(H, W, flowwarp::FlowDirection::Backward);
        ByteMask occ(H, W, 0);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const int64_t p = static_cast<int64_t>(y) * W + x;
                // forward field lives on frame t
                const int of = owner_at(objs, t, x, y);
                if (of >= 0) {
                    fwd.data[p] = objs[static_cast<size_t>(of)].vx;
                    fwd.data[hw + p] = objs[static_cast<size_t>(of)].vy;
                }
                // backward field + occlusion live on frame t+1
                const int ob = owner_at(objs, t + 1.0, x, y);
                double vx = 0, vy = 0;
                if (ob >= 0) {
                    vx = objs[static_cast<size_t>(ob)].vx;
                    vy = objs[static_cast<size_t>(ob)].vy;
                }
                bwd.data[p] = -vx;
                bwd.data[hw + p] = -vy;
                const double sx = x - vx, sy = y - vy;
                bool occluded = false;
                if (sx < 0.0 || sx > W - 1.0 || sy < 0.0 || sy > H - 1.0) {
                    occluded = true;
                } else {
                    const int cls_now = ob < 0 ? 0 : objs[static_cast<size_t>(ob)].class_id;
                    const int cls_src = class_at(objs, t, sx, sy);
                    if (cls_src != cls_now) {
                        occluded = true;
                    } else {
                        const int rx = static_cast<int>(std::lround(sx));
                        const int ry = static_cast<int>(std::lround(sy));
                        // raster disagrees with the continuous scene at the
                        // sampled point: boundary band under sub-pixel motion
                        if (clip.labels[static_cast<size_t>(t)].at(ry, rx) != cls_src) occluded = true;
                    }
                }
                occ.v[static_cast<size_t>(p)] = occluded ? 1 : 0;
            }
        clip.flows_fwd.push_back(std::move(fwd));
        clip.flows_bwd.push_back(std::move(bwd));
        clip.occlusion.push_back(std::move(occ));
    }

    return apply_domain_shift(clip, spec.shift);
}

VideoClip apply_domain_shift(const VideoClip& clip, const DomainShift& shift) {
    if (shift.brightness_gain < 0.0) throw DataError("brightness_gain must be >= 0");
    if (shift.noise_std < 0.0) throw DataError("noise_std must be >= 0");
    VideoClip out = clip;
    if (shift.is_identity_for(clip.texture_id)) return out;

    const int H = clip.height, W = clip.width;
    const int64_t hw = static_cast<int64_t>(H) * W;

    if (shift.texture_id >= 0 && shift.texture_id != clip.texture_id) {
        for (int t = 0; t < clip.num_frames; ++t) {
            Tensor& f = out.frames[static_cast<size_t>(t)];
            const LabelMap& lab = out.labels[static_cast<size_t>(t)];
            for (int64_t p = 0; p < hw; ++p) {
                if (lab.v[static_cast<size_t>(p)] != 0) continue;
                const int y = static_cast<int>(p / W), x = static_cast<int>(p % W);
                const auto rgb = background_texture(shift.texture_id, x, y);
                for (int c = 0; c < 3; ++c) f[c * hw + p] = rgb[static_cast<size_t>(c)];
            }
        }
        out.texture_id = shift.texture_id;
    }

    // rotation about the gray axis (Rodrigues with k = (1,1,1)/sqrt(3))
    const double cth = std::cos(shift.hue_shift), sth = std::sin(shift.hue_shift);
    const double a = cth + (1.0 - cth) / 3.0;
    const double b = (1.0 - cth) / 3.0 - sth / std::sqrt(3.0);
    const double c = (1.0 - cth) / 3.0 + sth / std::sqrt(3.0);
    const bool rotate = shift.hue_shift != 0.0;

    Rng noise(shift.noise_seed);
    const bool noisy = shift.noise_std > 0.0;

    for (int t = 0; t < clip.num_frames; ++t) {
        Tensor& f = out.frames[static_cast<size_t>(t)];
        for (int64_t p = 0; p < hw; ++p) {
            double r = f[p], gch = f[hw + p], bch = f[2 * hw + p];
            if (rotate) {
                const double nr = a * r + b * gch + c * bch;
                const double ng = c * r + a * gch + b * bch;
                const double nb = b * r + c * gch + a * bch;
                r = nr;
                gch = ng;
                bch = nb;
            }
            r *= shift.brightness_gain;
            gch *= shift.brightness_gain;
            bch *= shift.brightness_gain;
            if (noisy) {
                r += shift.noise_std * noise.normal();
                gch += shift.noise_std * noise.normal();
                bch += shift.noise_std * noise.normal();
            }
            f[p] = to_f32(std::min(1.0, std::max(0.0, r)));
            f[hw + p] = to_f32(std::min(1.0, std::max(0.0, gch)));
            f[2 * hw + p] = to_f32(std::min(1.0, std::max(0.0, bch)));
        }
    }
    return out;
}

// ---- dataset IO ----

namespace {

std::vector<float> tensor_to_f32(const Tensor& t) {
    std::vector<float> v(static_cast<size_t>(t.size()));
    for (int64_t i = 0; i < t.size(); ++i) v[static_cast<size_t>(i)] = static_cast<float>(t[i]);
    return v;
}

void write_flow_file(const std::string& path, const std::vector<flowwarp::FlowField>& flows) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open for writing: " + path);
    const uint8_t dir = static_cast<uint8_t>(flows.empty() ? flowwarp::FlowDirection::Backward
                                                           : flows.front().direction);
    f.write(reinterpret_cast<const char*>(&dir), 1);
    const int n = static_cast<int>(flows.size());
    const int H = n ? flows[0].height() : 0;
    const int W = n ? flows[0].width() : 0;
    std::vector<float> all;
    all.reserve(static_cast<size_t>(n) * 2 * H * W);
    for (const auto& fl : flows) {
        auto v = tensor_to_f32(fl.data);
        all.insert(all.end(), v.begin(), v.end());
    }
    io::write_array_f32(f, all, {n, 2, H, W});
    if (!f) throw DataError("write failed: " + path);
}

std::vector<flowwarp::FlowField> read_flow_file(const std::string& path, flowwarp::FlowDirection expect) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("missing flow file: " + path);
    uint8_t dir = 0;
    f.read(reinterpret_cast<char*>(&dir), 1);
    if (!f) throw DataError("truncated flow file: " + path);
    if (dir != static_cast<uint8_t>(expect)) throw DataError("unexpected flow direction tag in " + path);
    std::vector<int> dims;
    auto v = io::read_array_f32(f, dims, path);
    if (dims.size() != 4 || dims[1] != 2) throw DataError("bad flow dims in " + path);
    const int n = dims[0], H = dims[2], W = dims[3];
    std::vector<flowwarp::FlowField> flows;
    flows.reserve(static_cast<size_t>(n));
    const int64_t per = static_cast<int64_t>(2) * H * W;
    for (int i = 0; i < n; ++i) {
        flowwarp::FlowField fl = flowwarp::FlowField::zero(H, W, expect);
        for (int64_t j = 0; j < per; ++j) fl.data[j] = v[static_cast<size_t>(i * per + j)];
        flows.push_back(std::move(fl));
    }
    return flows;
}

std::string clip_dir_name(size_t idx) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "clip_%04zu", idx);
    return buf;
}

} // namespace

DatasetManifest write_dataset(const std::vector<VideoClip>& clips, const std::string& path,
                              const std::string& spec_echo) {
    fs::create_directories(path);
    DatasetManifest man;
    man.spec_echo = spec_echo;
    for (size_t i = 0; i < clips.size(); ++i) {
        const VideoClip& c = clips[i];
        const std::string name = clip_dir_name(i);
        const fs::path dir = fs::path(path) / name;
        fs::create_directories(dir);
        const int H = c.height, W = c.width, T = c.num_frames;

        std::vector<float> fr;
        fr.reserve(static_cast<size_t>(T) * 3 * H * W);
        for (const auto& f : c.frames) {
            auto v = tensor_to_f32(f);
            fr.insert(fr.end(), v.begin(), v.end());
        }
        io::save_f32_file((dir / "frames.bin").string(), fr, {T, 3, H, W});

        std::vector<uint8_t> lb;
        lb.reserve(static_cast<size_t>(T) * H * W);
        for (const auto& l : c.labels) lb.insert(lb.end(), l.v.begin(), l.v.end());
        io::save_u8_file((dir / "labels.bin").string(), lb, {T, H, W});

        write_flow_file((dir / "flow_fwd.bin").string(), c.flows_fwd);
        write_flow_file((dir / "flow_bwd.bin").string(), c.flows_bwd);

        std::vector<uint8_t> oc;
        oc.reserve(static_cast<size_t>(T - 1) * H * W);
        for (const auto& m : c.occlusion) oc.insert(oc.end(), m.v.begin(), m.v.end());
        io::save_u8_file((dir / "occ.bin").string(), oc, {T - 1, H, W});

        json meta = {{"dtype", "f32"},       {"height", H},          {"width", W},
                     {"frames", T},          {"classes", c.num_classes},
                     {"domain", domain_name(c.domain)}, {"texture_id", c.texture_id}};
        std::ofstream mf(dir / "meta.json");
        mf << meta.dump(2) << "\n";

        man.clips.push_back({name, H, W, T, c.num_classes, c.domain, c.texture_id});
    }
    json j;
    j["format_version"] = man.format_version;
    j["spec_echo"] = json::parse(spec_echo.empty() ? "{}" : spec_echo);
    j["clips"] = json::array();
    for (const auto& m : man.clips)
        j["clips"].push_back({{"name", m.name},
                              {"height", m.height},
                              {"width", m.width},
                              {"frames", m.num_frames},
                              {"classes", m.num_classes},
                              {"domain", domain_name(m.domain)},
                              {"texture_id", m.texture_id}});
    std::ofstream mf(fs::path(path) / "manifest.json");
    if (!mf) throw DataError("cannot write manifest in " + path);
    mf << j.dump(2) << "\n";
    return man;
}

DatasetManifest read_manifest(const std::string& path) {
    const fs::path mp = fs::path(path) / "manifest.json";
    std::ifstream mf(mp);
    if (!mf) throw DataError("manifest not found: " + mp.string());
    json j;
    try {
        mf >> j;
    } catch (const json::exception& e) {
        throw DataError("corrupt manifest " + mp.string() + ": " + e.what());
    }
    DatasetManifest man;
    man.format_version = j.at("format_version").get<int>();
    if (man.format_version != 1)
        throw DataError("unsupported dataset format version in " + mp.string());
    man.spec_echo = j.value("spec_echo", json::object()).dump();
    for (const auto& cj : j.at("clips")) {
        ClipMeta m;
        m.name = cj.at("name").get<std::string>();
        m.height = cj.at("height").get<int>();
        m.width = cj.at("width").get<int>();
        m.num_frames = cj.at("frames").get<int>();
        m.num_classes = cj.at("classes").get<int>();
        m.domain = domain_from_name(cj.at("domain").get<std::string>());
        m.texture_id = cj.value("texture_id", 0);
        man.clips.push_back(std::move(m));
    }
    return man;
}

VideoClip load_clip(const std::string& dataset_path, const ClipMeta& meta) {
    const fs::path dir = fs::path(dataset_path) / meta.name;
    VideoClip c;
    c.height = meta.height;
    c.width = meta.width;
    c.num_frames = meta.num_frames;
    c.num_classes = meta.num_classes;
    c.domain = meta.domain;
    c.texture_id = meta.texture_id;
    const int H = c.height, W = c.width, T = c.num_frames;
    const int64_t chw = static_cast<int64_t>(3) * H * W;
    const int64_t hw = static_cast<int64_t>(H) * W;

    const std::string fpath = (dir / "frames.bin").string();
    if (!fs::exists(fpath)) throw DataError(meta.name + ": missing file " + fpath);
    std::vector<int> dims;
    auto fr = io::load_f32_file(fpath, dims);
    if (dims != std::vector<int>{T, 3, H, W}) throw DataError(meta.name + ": bad frame dims in " + fpath);
    for (int t = 0; t < T; ++t) {
        Tensor f({3, H, W});
        for (int64_t i = 0; i < chw; ++i) f[i] = fr[static_cast<size_t>(t * chw + i)];
        c.frames.push_back(std::move(f));
    }

    const std::string lpath = (dir / "labels.bin").string();
    if (!fs::exists(lpath)) throw DataError(meta.name + ": missing file " + lpath);
    auto lb = io::load_u8_file(lpath, dims);
    if (dims != std::vector<int>{T, H, W}) throw DataError(meta.name + ": bad label dims in " + lpath);
    for (int t = 0; t < T; ++t) {
        LabelMap l(H, W);
        std::copy(lb.begin() + t * hw, lb.begin() + (t + 1) * hw, l.v.begin());
        c.labels.push_back(std::move(l));
    }

    const std::string ffp = (dir / "flow_fwd.bin").string();
    if (!fs::exists(ffp)) throw DataError(meta.name + ": missing file " + ffp);
    c.flows_fwd = read_flow_file(ffp, flowwarp::FlowDirection::Forward);
    const std::string fbp = (dir / "flow_bwd.bin").string();
    if (!fs::exists(fbp)) throw DataError(meta.name + ": missing file " + fbp);
    c.flows_bwd = read_flow_file(fbp, flowwarp::FlowDirection::Backward);

    const std::string opath = (dir / "occ.bin").string();
    if (!fs::exists(opath)) throw DataError(meta.name + ": missing file " + opath);
    auto oc = io::load_u8_file(opath, dims);
    if (dims != std::vector<int>{T - 1, H, W}) throw DataError(meta.name + ": bad occ dims in " + opath);
    for (int t = 0; t + 1 < T; ++t) {
        ByteMask m(H, W);
        std::copy(oc.begin() + t * hw, oc.begin() + (t + 1) * hw, m.v.begin());
        c.occlusion.push_back(std::move(m));
    }
    return c;
}

std::vector<VideoClip> load_dataset(const std::string& path) {
    const DatasetManifest man = read_manifest(path);
    std::vector<VideoClip> clips;
    clips.reserve(man.clips.size());
    for (const auto& m : man.clips) clips.push_back(load_clip(path, m));
    return clips;
}

} // namespace davsn::synthdata
