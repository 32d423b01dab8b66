#include "davsn/plotting.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "davsn/errors.h"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace davsn::plotting {

namespace {

const char* kPalette[] = {"#348abd", "#e24a33", "#988ed5", "#777777",
                          "#fbc15e", "#8eba42", "#ffb5b8", "#56b4e9"};

std::string f2s(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

} // namespace

void write_svg_chart(const std::string& path, const std::string& title,
                     const std::vector<Series>& series) {
    const int W = 760, H = 420;
    const int ml = 64, mr = 140, mt = 36, mb = 44;
    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    bool any = false;
    for (const auto& s : series)
        for (size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            if (!any) {
                xmin = xmax = s.x[i];
                ymin = ymax = s.y[i];
                any = true;
            }
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    if (!any) {
        xmin = ymin = 0;
        xmax = ymax = 1;
    }
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;
    const double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr); };
    auto py = [&](double y) { return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb); };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" "
          "font-size=\"15\">"
       << title << "</text>\n";
    os << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << (W - ml - mr) << "\" height=\""
       << (H - mt - mb) << "\" fill=\"none\" stroke=\"#444\"/>\n";

    for (int i = 0; i <= 4; ++i) {
        const double xv = xmin + (xmax - xmin) * i / 4.0;
        const double yv = ymin + (ymax - ymin) * i / 4.0;
        os << "<line x1=\"" << px(xv) << "\" y1=\"" << H - mb << "\" x2=\"" << px(xv) << "\" y2=\""
           << H - mb + 4 << "\" stroke=\"#444\"/>\n";
        os << "<text x=\"" << px(xv) << "\" y=\"" << H - mb + 18
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << f2s(xv)
           << "</text>\n";
        os << "<line x1=\"" << ml - 4 << "\" y1=\"" << py(yv) << "\" x2=\"" << ml << "\" y2=\"" << py(yv)
           << "\" stroke=\"#444\"/>\n";
        os << "<text x=\"" << ml - 8 << "\" y=\"" << py(yv) + 4
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << f2s(yv)
           << "</text>\n";
    }

    int ci = 0;
    for (const auto& s : series) {
        const char* color = kPalette[ci % 8];
        std::ostringstream pts;
        for (size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            pts << px(s.x[i]) << "," << py(s.y[i]) << " ";
        }
        os << "<polyline points=\"" << pts.str() << "\" fill=\"none\" stroke=\"" << color
           << "\" stroke-width=\"1.5\"/>\n";
        const int ly = mt + 16 + 18 * ci;
        os << "<line x1=\"" << W - mr + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - mr + 34 << "\" y2=\""
           << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << W - mr + 40 << "\" y=\"" << ly + 4
           << "\" font-family=\"sans-serif\" font-size=\"12\">" << s.label << "</text>\n";
        ++ci;
    }
    os << "</svg>\n";

    std::ofstream f(path);
    if (!f) throw DataError("cannot write plot: " + path);
    f << os.str();
}

std::vector<std::string> plot_metrics(const std::string& metrics_path, const std::string& out_dir) {
    std::ifstream f(metrics_path);
    if (!f) throw DataError("metrics log not found: " + metrics_path);
    fs::create_directories(out_dir);

    const std::vector<std::string> loss_keys = {"ssl", "sa", "sta", "wd", "itcr", "total"};
    std::vector<Series> losses(loss_keys.size());
    for (size_t i = 0; i < loss_keys.size(); ++i) losses[i].label = loss_keys[i];
    Series miou{"miou_target", {}, {}};
    Series tc{"temporal_consistency", {}, {}};
    Series gate{"gate_fraction", {}, {}};

    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError("metrics line " + std::to_string(lineno) + " is not JSON: " + e.what());
        }
        const double step = j.value("step", 0.0);
        if (j.contains("miou_target")) {
            miou.x.push_back(step);
            miou.y.push_back(j["miou_target"].get<double>());
            tc.x.push_back(step);
            tc.y.push_back(j.value("temporal_consistency", 0.0));
        } else {
            for (size_t i = 0; i < loss_keys.size(); ++i) {
                if (!j.contains(loss_keys[i])) continue;
                losses[i].x.push_back(step);
                losses[i].y.push_back(j[loss_keys[i]].get<double>());
            }
            gate.x.push_back(step);
            gate.y.push_back(j.value("gate_fraction", 0.0));
        }
    }

    std::vector<std::string> written;
    std::vector<Series> nonempty;
    for (auto& s : losses)
        if (!s.x.empty()) nonempty.push_back(std::move(s));
    if (!gate.x.empty()) nonempty.push_back(std::move(gate));
    const std::string lp = (fs::path(out_dir) / "loss_curves.svg").string();
    write_svg_chart(lp, "training losses", nonempty);
    written.push_back(lp);

    std::vector<Series> evals;
    if (!miou.x.empty()) evals.push_back(std::move(miou));
    if (!tc.x.empty()) evals.push_back(std::move(tc));
    const std::string ep = (fs::path(out_dir) / "eval_curves.svg").string();
    write_svg_chart(ep, "target-domain evaluation", evals);
    written.push_back(ep);
    return written;
}

} // namespace davsn::plotting
