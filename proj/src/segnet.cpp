#include "davsn/segnet.h"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "davsn/rng.h"

using json = nlohmann::json;

namespace davsn::segnet {

void SegModelConfig::validate(int height, int width) const {
    if (num_classes < 2) throw DataError("segnet config: num_classes >= 2 required");
    if (base_channels < 1) throw DataError("segnet config: base_channels >= 1 required");
    if (num_down_levels < 1) throw DataError("segnet config: num_down_levels >= 1 required");
    const int div = 1 << num_down_levels;
    if (height > 0 && (height % div || height < 2 * div))
        throw DataError("segnet config: height must be a multiple of 2^levels");
    if (width > 0 && (width % div || width < 2 * div))
        throw DataError("segnet config: width must be a multiple of 2^levels");
}

Tensor* ParamSet::find(const std::string& name) {
    for (auto& p : params)
        if (p.name == name) return &p.value;
    return nullptr;
}

const Tensor* ParamSet::find(const std::string& name) const {
    for (const auto& p : params)
        if (p.name == name) return &p.value;
    return nullptr;
}

int64_t ParamSet::total_elements() const {
    int64_t n = 0;
    for (const auto& p : params) n += p.value.size();
    return n;
}

bool ParamSet::all_finite() const {
    for (const auto& p : params)
        if (!p.value.all_finite()) return false;
    return true;
}

namespace {

int level_channels(const SegModelConfig& c, int level) { return c.base_channels << level; }

Tensor uniform_fanin(Rng& rng, const std::vector<int>& dims) {
    int64_t fan_in = 1;
    for (size_t i = 1; i < dims.size(); ++i) fan_in *= dims[i];
    if (fan_in <= 0) throw DataError("layer with zero fan-in");
    const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Tensor t(dims);
    for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-s, s);
    return t;
}

} // namespace

ParamSet init_params(const SegModelConfig& config, uint64_t seed) {
    config.validate();
    ParamSet ps;
    ps.config = config;
    Rng rng(seed);

    auto conv = [&](const std::string& name, int cout, int cin, int k) {
        ps.params.push_back({name + "_w", uniform_fanin(rng, {cout, cin, k, k})});
        ps.params.push_back({name + "_b", Tensor({cout})});
    };
    auto branch = [&](const std::string& prefix) {
        conv(prefix + "stem", config.base_channels, 3, 3);
        for (int l = 0; l < config.num_down_levels; ++l)
            conv(prefix + "down" + std::to_string(l), level_channels(config, l + 1),
                 level_channels(config, l), 3);
        const int top = level_channels(config, config.num_down_levels);
        conv(prefix + "mid", top, top, 3);
        // decode back to half resolution, collapsing to base channels
        int ch = top;
        for (int l = config.num_down_levels - 1; l >= 1; --l) {
            conv(prefix + "up" + std::to_string(l), config.base_channels, ch, 3);
            ch = config.base_channels;
        }
        conv(prefix + "head", config.num_classes, ch, 1);
    };

    if (config.shared_branches) {
        branch("br.");
    } else {
        branch("brA.");
        branch("brB.");
    }

    // fusion starts as the average of the two branch score maps
    const int C = config.num_classes;
    Tensor fw({C, 2 * C, 1, 1});
    for (int c = 0; c < C; ++c) {
        fw.at4(c, c, 0, 0) = 0.5;
        fw.at4(c, C + c, 0, 0) = 0.5;
    }
    ps.params.push_back({"fusion_w", std::move(fw)});
    ps.params.push_back({"fusion_b", Tensor({C})});
    return ps;
}

ad::Var BoundParams::var(const std::string& name) const {
    for (size_t i = 0; i < ps->params.size(); ++i)
        if (ps->params[i].name == name) return vars[i];
    throw NumericError("unknown parameter '" + name + "'");
}

BoundParams bind(ad::Graph& g, const ParamSet& ps, bool requires_grad) {
    BoundParams bp;
    bp.ps = &ps;
    bp.vars.reserve(ps.params.size());
    for (const auto& p : ps.params) bp.vars.push_back(g.leaf(p.value, requires_grad));
    return bp;
}

namespace {

ad::Var checked(ad::Var v, const std::string& layer) {
    if (!v.val().all_finite()) throw NumericError("non-finite activations in layer " + layer);
    return v;
}

} // namespace

ad::Var branch_scores_graph(ad::Graph& g, const BoundParams& bp, const Tensor& frame, char branch) {
    const SegModelConfig& c = bp.ps->config;
    if (frame.ndim() != 3 || frame.dim(0) != 3)
        throw NumericError("branch expects a [3,H,W] frame, got " + frame.shape_str());
    c.validate(frame.dim(1), frame.dim(2));
    const std::string prefix = c.shared_branches ? "br." : (branch == 'A' ? "brA." : "brB.");
    const double slope = 0.1;

    ad::Var x = g.constant(frame);
    x = checked(ad::leaky_relu(ad::conv2d(x, bp.var(prefix + "stem_w"), bp.var(prefix + "stem_b"), 1, 1), slope),
                prefix + "stem");
    for (int l = 0; l < c.num_down_levels; ++l) {
        const std::string n = prefix + "down" + std::to_string(l);
        x = checked(ad::leaky_relu(ad::conv2d(x, bp.var(n + "_w"), bp.var(n + "_b"), 2, 1), slope), n);
    }
    x = checked(ad::leaky_relu(ad::conv2d(x, bp.var(prefix + "mid_w"), bp.var(prefix + "mid_b"), 1, 1), slope),
                prefix + "mid");
    for (int l = c.num_down_levels - 1; l >= 1; --l) {
        const std::string n = prefix + "up" + std::to_string(l);
        x = ad::upsample_nearest2(x);
        x = checked(ad::leaky_relu(ad::conv2d(x, bp.var(n + "_w"), bp.var(n + "_b"), 1, 1), slope), n);
    }
    x = checked(ad::conv2d(x, bp.var(prefix + "head_w"), bp.var(prefix + "head_b"), 1, 0), prefix + "head");
    // scores are produced at half resolution; lift back to the input grid
    return ad::upsample_nearest2(x);
}

PairForward forward_pair_graph(ad::Graph& g, const BoundParams& bp, const Tensor& frame_k,
                               const Tensor& frame_km1, const flowwarp::FlowField& flow_bwd) {
    if (!frame_k.same_shape(frame_km1))
        throw NumericError("forward_pair frames differ in shape");
    if (flow_bwd.direction != flowwarp::FlowDirection::Backward)
        throw NumericError("forward_pair needs a backward flow field");
    if (flow_bwd.height() != frame_k.dim(1) || flow_bwd.width() != frame_k.dim(2))
        throw NumericError("forward_pair flow shape mismatch");

    PairForward out;
    ad::Var score_a = branch_scores_graph(g, bp, frame_k, 'A');
    ad::Var score_b = branch_scores_graph(g, bp, frame_km1, 'B');
    // warp previous-frame scores onto the current grid; equal scores of 0
    // outside the frame softmax to the uniform distribution
    ad::Var warped_b = ad::warp_bilinear(score_b, flow_bwd.data, 0.0, &out.warp_valid);
    ad::Var stacked = ad::concat_channels(score_a, warped_b);
    out.features = checked(ad::conv2d(stacked, bp.var("fusion_w"), bp.var("fusion_b"), 1, 0), "fusion");
    out.prob = ad::softmax_channels(out.features);
    return out;
}

PairOutput forward_pair(const ParamSet& ps, const Tensor& frame_k, const Tensor& frame_km1,
                        const flowwarp::FlowField& flow_bwd) {
    ad::Graph g;
    BoundParams bp = bind(g, ps, false);
    PairForward f = forward_pair_graph(g, bp, frame_k, frame_km1, flow_bwd);
    return {f.prob.val(), f.features.val(), std::move(f.warp_valid)};
}

bool is_prob_map(const Tensor& p, double tol) {
    if (p.ndim() != 3) return false;
    const int C = p.dim(0);
    const int64_t hw = static_cast<int64_t>(p.dim(1)) * p.dim(2);
    for (int64_t i = 0; i < hw; ++i) {
        double s = 0.0;
        for (int c = 0; c < C; ++c) {
            const double v = p[c * hw + i];
            if (v < 0.0) return false;
            s += v;
        }
        if (std::fabs(s - 1.0) > tol) return false;
    }
    return true;
}

void save_checkpoint(const ParamSet& ps, const std::vector<io::NamedRecord>& optimizer_state,
                     const std::string& path) {
    std::vector<io::NamedRecord> recs;
    json meta = {{"ckpt_version", kCheckpointVersion},
                 {"kind", "davsn"},
                 {"num_classes", ps.config.num_classes},
                 {"base_channels", ps.config.base_channels},
                 {"num_down_levels", ps.config.num_down_levels},
                 {"shared_branches", ps.config.shared_branches}};
    io::NamedRecord mr;
    mr.name = "meta";
    mr.dtype = io::DType::Bytes;
    mr.bytes = meta.dump();
    recs.push_back(std::move(mr));

    io::NamedRecord sr;
    sr.name = "step";
    sr.dtype = io::DType::I64;
    sr.ints = {ps.step};
    recs.push_back(std::move(sr));

    for (const auto& p : ps.params) {
        io::NamedRecord r;
        r.name = "param:" + p.name;
        r.dtype = io::DType::F64;
        r.tensor = p.value;
        recs.push_back(std::move(r));
    }
    for (const auto& r : optimizer_state) recs.push_back(r);

    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open checkpoint for writing: " + path);
    io::write_container(f, recs);
    if (!f) throw DataError("checkpoint write failed: " + path);
}

std::pair<ParamSet, std::vector<io::NamedRecord>> load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("checkpoint not found: " + path);
    auto recs = io::read_container(f, path);
    ParamSet ps;
    std::vector<io::NamedRecord> opt;
    bool meta_seen = false;
    for (auto& r : recs) {
        if (r.name == "meta") {
            json meta;
            try {
                meta = json::parse(r.bytes);
            } catch (const json::exception& e) {
                throw DataError("corrupt checkpoint meta in " + path + ": " + e.what());
            }
            const int ver = meta.value("ckpt_version", -1);
            if (ver != kCheckpointVersion)
                throw DataError("checkpoint version mismatch in " + path + ": found " +
                                std::to_string(ver) + ", expected " + std::to_string(kCheckpointVersion));
            ps.config.num_classes = meta.at("num_classes").get<int>();
            ps.config.base_channels = meta.at("base_channels").get<int>();
            ps.config.num_down_levels = meta.at("num_down_levels").get<int>();
            ps.config.shared_branches = meta.at("shared_branches").get<bool>();
            meta_seen = true;
        } else if (r.name == "step") {
            ps.step = r.ints.at(0);
        } else if (r.name.rfind("param:", 0) == 0) {
            ps.params.push_back({r.name.substr(6), std::move(r.tensor)});
        } else {
            opt.push_back(std::move(r));
        }
    }
    if (!meta_seen) throw DataError("checkpoint missing meta record: " + path);
    if (!ps.all_finite()) throw DataError("checkpoint holds non-finite parameters: " + path);
    return {std::move(ps), std::move(opt)};
}

} // namespace davsn::segnet
