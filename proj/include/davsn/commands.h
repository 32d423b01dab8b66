#pragma once

#include <string>
#include <vector>

#include "davsn/runconfig.h"

namespace davsn::cli {

struct AblationRow {
    std::string mode;
    double miou = 0.0;
    double temporal_consistency = 0.0;
    double sigma2_inter = 0.0;
    double sigma2_intra = 0.0;
    int seeds = 0;
};

// Writes source/target/eval datasets under the configured directories.
void cmd_generate(const RunConfig& cfg);
// Full training run; checkpoints + metrics under out_dir.
void cmd_train(const RunConfig& cfg);
// Evaluates a training checkpoint on a dataset; report printed and written.
void cmd_eval(const RunConfig& cfg, const std::string& checkpoint, const std::string& dataset_dir);
// Trains every requested mode x seed and emits the comparison table.
std::vector<AblationRow> cmd_ablate(const RunConfig& cfg);
// Curve images from a metrics log.
void cmd_plot(const RunConfig& cfg, const std::string& metrics_path);

std::string ablation_table_text(const std::vector<AblationRow>& rows);

} // namespace davsn::cli
