#pragma once

#include <optional>
#include <string>
#include <vector>

#include "davsn/discriminators.h"
#include "davsn/evalkit.h"
#include "davsn/losses.h"
#include "davsn/rng.h"
#include "davsn/segnet.h"
#include "davsn/synthdata.h"

namespace davsn::trainer {

// Ablation rows of the method: which loss terms are active.
enum class Mode { SourceOnly, SA, STA, JT, CTCR, ITCR, DAVSN };

std::string mode_name(Mode m);
Mode mode_from_name(const std::string& s);

struct ModeGates {
    bool ds = false;    // spatial discriminator + Eq. 1
    bool dst = false;   // spatial-temporal discriminator + Eq. 2
    bool wd = false;    // Eq. 3
    bool itcr = false;  // Eq. 5
};
ModeGates gates_for(Mode m);

enum class FlowSource { Oracle, Estimated };

struct TrainConfig {
    Mode mode = Mode::DAVSN;
    double lambda_sa = 1.0;
    double lambda_wd = 1.0;
    double lambda_u = 0.001;
    double lr0 = 1e-4;
    double disc_lr0 = -1.0;  // < 0: use lr0
    int64_t total_steps = 3000;
    double poly_power = 0.9;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    int batch_source = 1;
    int batch_target = 1;
    uint64_t seed = 1;
    FlowSource flow_source = FlowSource::Oracle;
    bool gan_saturating = false;  // literal log(1-D) generator term
    int itcr_frame_gap = 1;       // l in the current-pair (x_k, x_{k-l})
    double tau_occ = 1.0;
    segnet::SegModelConfig seg;
    int disc_base_channels = 8;
    int disc_num_layers = 4;
    bool disc_patch_scores = false;

    double disc_lr() const { return disc_lr0 < 0.0 ? lr0 : disc_lr0; }
    void validate() const;
};

// lr0 * (1 - step/total_steps)^power.
double poly_lr(int64_t step, double lr0, int64_t total_steps, double power);

struct TrainState {
    TrainConfig cfg;
    segnet::ParamSet gen;
    disc::DiscParams d_s;
    disc::DiscParams d_st;
    std::vector<Tensor> gen_m;   // momentum buffers aligned with gen.params
    std::vector<Tensor> d_s_mw, d_s_mb;
    std::vector<Tensor> d_st_mw, d_st_mb;
    int64_t step = 0;
    Rng rng{0};
};

TrainState init_train_state(const TrainConfig& cfg);

// Three consecutive frames (k-2, k-1, k) of one clip plus the pair fields.
struct ClipTriple {
    const synthdata::VideoClip* clip = nullptr;
    int k = 2;  // index of the current frame; requires k >= 2

    const Tensor& frame(int back) const { return clip->frames[static_cast<size_t>(k - back)]; }
    const LabelMap& label_k() const { return clip->labels[static_cast<size_t>(k)]; }
    const flowwarp::FlowField& bwd(int back) const {  // pair (k-back-1, k-back)
        return clip->flows_bwd[static_cast<size_t>(k - back - 1)];
    }
    const flowwarp::FlowField& fwd(int back) const {
        return clip->flows_fwd[static_cast<size_t>(k - back - 1)];
    }
    const ByteMask& occ(int back) const { return clip->occlusion[static_cast<size_t>(k - back - 1)]; }
};

// One alternating step: phase 1 updates the active discriminators (ascending
// Eqs. 1-2 minus lambda_wd * Eq. 3 on detached predictions; skipped when
// lambda_u == 0), phase 2 updates the generator (ssl + lambda_u * generator-
// side adversarial terms + lambda_u * itcr) with discriminators frozen.
losses::LossBundle train_step(TrainState& st, const std::vector<ClipTriple>& source_batch,
                              const std::vector<ClipTriple>& target_batch);

// Test seam: run only one of the two phases.
losses::LossBundle train_step_phases(TrainState& st, const std::vector<ClipTriple>& source_batch,
                                     const std::vector<ClipTriple>& target_batch, bool do_phase1,
                                     bool do_phase2);

// ---- full training runs ----

struct RunControl {
    std::string out_dir;
    int64_t eval_every = 500;
    int64_t ckpt_every = 0;  // 0: final checkpoint only
    std::string resume_from;
};

struct RunResult {
    std::string checkpoint_path;
    std::string metrics_path;
    evalkit::EvalSummary final_eval;
};

// Streams one JSON record per step and per evaluation into
// <out_dir>/metrics.jsonl, checkpoints into <out_dir>/ckpt_*.bin.
RunResult run_training(const TrainConfig& cfg, const std::vector<synthdata::VideoClip>& source,
                       const std::vector<synthdata::VideoClip>& target,
                       const std::vector<synthdata::VideoClip>& eval_clips, const RunControl& ctl);

// Checkpoint container holding generator, discriminators, optimizer moments,
// step counter and RNG stream (resume reproduces the uninterrupted run
// bit-exactly).
void save_train_state(const TrainState& st, const std::string& path);
TrainState load_train_state(const std::string& path);

} // namespace davsn::trainer
