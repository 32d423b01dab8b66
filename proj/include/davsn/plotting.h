#pragma once

#include <string>
#include <vector>

namespace davsn::plotting {

struct Series {
    std::string label;
    std::vector<double> x, y;
};

// Minimal SVG line chart: axes, ticks, legend. Good enough for loss and mIoU
// curves; no interactivity by design.
void write_svg_chart(const std::string& path, const std::string& title,
                     const std::vector<Series>& series);

// Reads a metrics.jsonl stream and emits loss_curves.svg and eval_curves.svg
// under out_dir. Returns the written file paths.
std::vector<std::string> plot_metrics(const std::string& metrics_path, const std::string& out_dir);

} // namespace davsn::plotting
