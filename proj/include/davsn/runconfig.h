#pragma once

#include <string>
#include <vector>

#include "davsn/synthdata.h"
#include "davsn/trainer.h"

namespace davsn::cli {

// Everything a run needs, serialized as flat `key = value` text. Unknown keys
// are rejected; flag overrides win over the file.
struct RunConfig {
    // training
    std::string mode = "davsn";
    double lambda_sa = 1.0;
    double lambda_wd = 1.0;
    double lambda_u = 0.001;
    double lr0 = 1e-4;
    double disc_lr0 = -1.0;
    int64_t total_steps = 3000;
    double poly_power = 0.9;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    int batch_source = 1;
    int batch_target = 1;
    uint64_t seed = 1;
    std::string flow_source = "oracle";
    bool gan_saturating = false;
    int itcr_frame_gap = 1;
    double tau_occ = 1.0;
    // model
    int num_classes = 5;
    int base_channels = 8;
    int num_down_levels = 2;
    bool shared_branches = true;
    int disc_base_channels = 8;
    int disc_num_layers = 4;
    bool disc_patch_scores = false;
    // paths / cadence
    std::string source_dir;
    std::string target_dir;
    std::string eval_dir;
    std::string out_dir = "out";
    int64_t eval_every = 500;
    int64_t ckpt_every = 0;
    std::string resume_from;
    // generation
    int gen_height = 64;
    int gen_width = 128;
    int gen_frames = 3;
    int gen_objects = 4;
    int gen_clips_source = 200;
    int gen_clips_target = 200;
    int gen_clips_eval = 40;
    uint64_t gen_seed_source = 1000;
    uint64_t gen_seed_target = 20000;
    uint64_t gen_seed_eval = 40000;
    double gen_max_speed = 3.0;
    bool gen_integer_velocities = true;
    int gen_source_texture = 0;
    int gen_target_texture = 2;
    double gen_source_brightness = 1.0;
    double gen_target_brightness = 0.72;
    double gen_source_hue = 0.0;
    double gen_target_hue = 0.5;
    double gen_source_noise = 0.01;
    double gen_target_noise = 0.05;
    // ablation
    std::string ablate_modes = "source_only,sa,sta,jt,ctcr,itcr,davsn";
    std::string ablate_seeds = "1,2,3";
    int ablate_jobs = 2;

    trainer::TrainConfig to_train_config() const;
    synthdata::DomainShift source_shift(uint64_t noise_seed) const;
    synthdata::DomainShift target_shift(uint64_t noise_seed) const;
};

RunConfig parse_config_text(const std::string& text);
RunConfig load_config_file(const std::string& path);
// `key=value` overrides applied on top (flags win).
void apply_overrides(RunConfig& cfg, const std::vector<std::string>& overrides);
std::string serialize_config(const RunConfig& cfg);
void write_config_echo(const RunConfig& cfg, const std::string& out_dir);

} // namespace davsn::cli
