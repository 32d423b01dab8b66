#pragma once

#include <string>
#include <vector>

#include "davsn/array_io.h"
#include "davsn/autodiff.h"
#include "davsn/flowwarp.h"

namespace davsn::segnet {

// Two-branch video segmentation model: branch A segments the current frame,
// branch B segments the previous frame and its score map is backward-warped
// onto the current grid; a 1x1 score-fusion conv combines them; softmax last.
// Branches share parameters by default.
struct SegModelConfig {
    int num_classes = 5;
    int base_channels = 8;
    int num_down_levels = 2;
    bool shared_branches = true;

    // H,W (when given) must be divisible by 2^num_down_levels.
    void validate(int height = -1, int width = -1) const;
};

struct NamedParam {
    std::string name;
    Tensor value;
};

struct ParamSet {
    SegModelConfig config;
    std::vector<NamedParam> params;
    int64_t step = 0;

    Tensor* find(const std::string& name);
    const Tensor* find(const std::string& name) const;
    int64_t total_elements() const;
    bool all_finite() const;
};

// Scaled-uniform fan-in init for branch convs (U(-1/sqrt(fan_in), +)), biases
// zero; the fusion 1x1 starts as the 0.5/0.5 average of the two branch score
// maps so class channels are aligned from step 0.
ParamSet init_params(const SegModelConfig& config, uint64_t seed);

struct BoundParams {
    const ParamSet* ps = nullptr;
    std::vector<ad::Var> vars;  // aligned with ps->params
    ad::Var var(const std::string& name) const;
};

BoundParams bind(ad::Graph& g, const ParamSet& ps, bool requires_grad);

struct PairForward {
    ad::Var prob;             // [C,H,W], per-pixel simplex
    ad::Var features;         // pre-softmax fused score map [C,H,W]
    ByteMask warp_valid;      // branch-B warp in-bounds mask (1 = in frame)
};

// frame_k / frame_km1: [3,H,W]; flow_bwd maps frame k pixels into frame k-1.
// `branch` selects the parameter prefix when branches are unshared.
PairForward forward_pair_graph(ad::Graph& g, const BoundParams& bp, const Tensor& frame_k,
                               const Tensor& frame_km1, const flowwarp::FlowField& flow_bwd);

// Single-branch score map, exposed for tests that use branch A as an oracle.
ad::Var branch_scores_graph(ad::Graph& g, const BoundParams& bp, const Tensor& frame, char branch);

struct PairOutput {
    Tensor prob;
    Tensor features;
    ByteMask warp_valid;
};

// Inference wrapper around forward_pair_graph (no gradients recorded).
PairOutput forward_pair(const ParamSet& ps, const Tensor& frame_k, const Tensor& frame_km1,
                        const flowwarp::FlowField& flow_bwd);

inline constexpr int kCheckpointVersion = 1;

// Versioned binary container of named arrays plus a config echo; optimizer
// records are stored alongside under their own names.
void save_checkpoint(const ParamSet& ps, const std::vector<io::NamedRecord>& optimizer_state,
                     const std::string& path);
std::pair<ParamSet, std::vector<io::NamedRecord>> load_checkpoint(const std::string& path);

// True when every per-pixel channel vector sums to 1 within tol and is
// non-negative.
bool is_prob_map(const Tensor& p, double tol = 1e-5);

} // namespace davsn::segnet
