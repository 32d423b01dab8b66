#include "davsn/evalkit.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

using json = nlohmann::json;

namespace davsn::evalkit {

int64_t ConfusionMatrix::total() const {
    int64_t n = 0;
    for (int64_t c : counts) n += c;
    return n;
}

void ConfusionMatrix::add(const ConfusionMatrix& o) {
    if (o.num_classes != num_classes) throw NumericError("confusion matrix size mismatch");
    for (size_t i = 0; i < counts.size(); ++i) counts[i] += o.counts[i];
}

void ConfusionMatrix::accumulate(const LabelMap& truth, const LabelMap& pred) {
    if (truth.height != pred.height || truth.width != pred.width)
        throw NumericError("confusion accumulate: label shape mismatch");
    for (int64_t i = 0; i < truth.size(); ++i) {
        const int t = truth.v[static_cast<size_t>(i)];
        const int p = pred.v[static_cast<size_t>(i)];
        if (t >= num_classes || p >= num_classes) throw DataError("label out of confusion-matrix range");
        at(t, p) += 1;
    }
}

MiouResult miou(const ConfusionMatrix& cm) {
    const int C = cm.num_classes;
    MiouResult r;
    r.per_class.assign(static_cast<size_t>(C), std::numeric_limits<double>::quiet_NaN());
    double sum = 0.0;
    int counted = 0;
    for (int c = 0; c < C; ++c) {
        int64_t row = 0, col = 0;
        for (int k = 0; k < C; ++k) {
            row += cm.at(c, k);
            col += cm.at(k, c);
        }
        const int64_t inter = cm.at(c, c);
        const int64_t uni = row + col - inter;
        if (uni == 0) continue;  // class absent from both gt and prediction
        const double iou = static_cast<double>(inter) / static_cast<double>(uni);
        r.per_class[static_cast<size_t>(c)] = iou;
        sum += iou;
        ++counted;
    }
    if (counted == 0) throw NumericError("miou: all classes absent");
    r.mean = sum / counted;
    return r;
}

namespace {

LabelMap argmax_map(const Tensor& p) {
    const int C = p.dim(0), H = p.dim(1), W = p.dim(2);
    const int64_t hw = static_cast<int64_t>(H) * W;
    LabelMap out(H, W);
    for (int64_t i = 0; i < hw; ++i) {
        int best = 0;
        double bv = p[i];
        for (int c = 1; c < C; ++c) {
            const double v = p[c * hw + i];
            if (v > bv) {
                bv = v;
                best = c;
            }
        }
        out.v[static_cast<size_t>(i)] = static_cast<uint8_t>(best);
    }
    return out;
}

} // namespace

double temporal_consistency(const Tensor& p_k, const Tensor& p_km1, const flowwarp::FlowField& flow_bwd,
                            const ByteMask& occ_valid) {
    if (!p_k.same_shape(p_km1)) throw NumericError("temporal_consistency shape mismatch");
    auto [warped, wmask] = flowwarp::backward_warp(p_km1, flow_bwd);
    const LabelMap a = argmax_map(p_k);
    const LabelMap b = argmax_map(warped);
    if (occ_valid.height != a.height || occ_valid.width != a.width)
        throw NumericError("temporal_consistency mask shape mismatch");
    int64_t n = 0, agree = 0;
    for (int64_t i = 0; i < a.size(); ++i) {
        if (!occ_valid.v[static_cast<size_t>(i)] || !wmask.m.v[static_cast<size_t>(i)]) continue;
        ++n;
        agree += (a.v[static_cast<size_t>(i)] == b.v[static_cast<size_t>(i)]);
    }
    if (n == 0) throw NumericError("temporal_consistency: no valid pixels");
    return static_cast<double>(agree) / static_cast<double>(n);
}

VarianceResult feature_variance(const std::vector<double>& features, int feature_dim,
                                const std::vector<int>& labels) {
    if (feature_dim <= 0) throw NumericError("feature_variance: feature_dim must be positive");
    const size_t n = labels.size();
    if (features.size() != n * static_cast<size_t>(feature_dim))
        throw NumericError("feature_variance: features/labels size mismatch");

    int max_label = 0;
    for (int l : labels) max_label = std::max(max_label, l);
    std::vector<std::vector<double>> centroids(static_cast<size_t>(max_label) + 1,
                                               std::vector<double>(static_cast<size_t>(feature_dim), 0.0));
    std::vector<int64_t> counts(static_cast<size_t>(max_label) + 1, 0);
    for (size_t i = 0; i < n; ++i) {
        auto& c = centroids[static_cast<size_t>(labels[i])];
        for (int d = 0; d < feature_dim; ++d) c[static_cast<size_t>(d)] += features[i * feature_dim + d];
        ++counts[static_cast<size_t>(labels[i])];
    }
    std::vector<int> present;
    for (size_t c = 0; c < counts.size(); ++c)
        if (counts[c] > 0) {
            for (double& v : centroids[c]) v /= static_cast<double>(counts[c]);
            present.push_back(static_cast<int>(c));
        }
    if (present.size() < 2) throw NumericError("feature_variance: fewer than two classes present");

    std::vector<double> global(static_cast<size_t>(feature_dim), 0.0);
    for (int c : present)
        for (int d = 0; d < feature_dim; ++d)
            global[static_cast<size_t>(d)] += centroids[static_cast<size_t>(c)][static_cast<size_t>(d)];
    for (double& v : global) v /= static_cast<double>(present.size());

    VarianceResult r;
    for (int c : present) {
        double d2 = 0.0;
        for (int d = 0; d < feature_dim; ++d) {
            const double diff = centroids[static_cast<size_t>(c)][static_cast<size_t>(d)] -
                                global[static_cast<size_t>(d)];
            d2 += diff * diff;
        }
        r.inter += d2;
    }
    r.inter /= static_cast<double>(present.size());

    double intra_sum = 0.0;
    for (int c : present) {
        double acc = 0.0;
        const auto& cen = centroids[static_cast<size_t>(c)];
        for (size_t i = 0; i < n; ++i) {
            if (labels[i] != c) continue;
            double d2 = 0.0;
            for (int d = 0; d < feature_dim; ++d) {
                const double diff = features[i * feature_dim + d] - cen[static_cast<size_t>(d)];
                d2 += diff * diff;
            }
            acc += d2;
        }
        intra_sum += acc / static_cast<double>(counts[static_cast<size_t>(c)]);
    }
    r.intra = intra_sum / static_cast<double>(present.size());
    return r;
}

EvalSummary evaluate_model(const segnet::ParamSet& params, const std::vector<synthdata::VideoClip>& clips,
                           EvalFlow flow_source, double tau_occ) {
    if (clips.empty()) throw DataError("evaluate_model: no clips");
    const int C = params.config.num_classes;
    ConfusionMatrix cm(C);
    double tc_sum = 0.0;
    int64_t tc_n = 0;

    std::vector<double> feats;
    std::vector<int> feat_labels;
    const int kStride = 4;
    const size_t kMaxVectors = 60000;

    for (const auto& clip : clips) {
        segnet::PairOutput prev;
        bool has_prev = false;
        for (int k = 1; k < clip.num_frames; ++k) {
            flowwarp::FlowField flow = clip.flows_bwd[static_cast<size_t>(k - 1)];
            ByteMask occ_valid(clip.height, clip.width, 1);
            if (flow_source == EvalFlow::Estimated) {
                flow = flowwarp::estimate_flow(clip.frames[static_cast<size_t>(k)],
                                               clip.frames[static_cast<size_t>(k - 1)]);
                const auto fwd = flowwarp::estimate_flow(clip.frames[static_cast<size_t>(k - 1)],
                                                         clip.frames[static_cast<size_t>(k)], {},
                                                         flowwarp::FlowDirection::Forward);
                occ_valid = flowwarp::occlusion_mask(fwd, flow, tau_occ).m;
            } else {
                const ByteMask& occ = clip.occlusion[static_cast<size_t>(k - 1)];
                for (int64_t i = 0; i < occ.size(); ++i)
                    occ_valid.v[static_cast<size_t>(i)] = occ.v[static_cast<size_t>(i)] ? 0 : 1;
            }

            segnet::PairOutput out = segnet::forward_pair(params, clip.frames[static_cast<size_t>(k)],
                                                          clip.frames[static_cast<size_t>(k - 1)], flow);
            cm.accumulate(clip.labels[static_cast<size_t>(k)], argmax_map(out.prob));

            if (has_prev) {
                tc_sum += temporal_consistency(out.prob, prev.prob, flow, occ_valid);
                ++tc_n;
            }

            // stacked consecutive pre-softmax features, spatially subsampled
            if (has_prev && feat_labels.size() < kMaxVectors) {
                const int64_t hw = static_cast<int64_t>(clip.height) * clip.width;
                for (int y = 0; y < clip.height; y += kStride)
                    for (int x = 0; x < clip.width; x += kStride) {
                        if (feat_labels.size() >= kMaxVectors) break;
                        const int64_t p = static_cast<int64_t>(y) * clip.width + x;
                        for (int c = 0; c < C; ++c) feats.push_back(prev.features[c * hw + p]);
                        for (int c = 0; c < C; ++c) feats.push_back(out.features[c * hw + p]);
                        feat_labels.push_back(clip.labels[static_cast<size_t>(k)].v[static_cast<size_t>(p)]);
                    }
            }
            prev = std::move(out);
            has_prev = true;
        }
    }

    EvalSummary s;
    MiouResult mr = miou(cm);
    s.miou = mr.mean;
    s.per_class_iou = mr.per_class;
    s.temporal_consistency = tc_n ? tc_sum / static_cast<double>(tc_n) : 0.0;
    s.pixels = cm.total();
    try {
        VarianceResult vr = feature_variance(feats, 2 * C, feat_labels);
        s.sigma2_inter = vr.inter;
        s.sigma2_intra = vr.intra;
    } catch (const NumericError&) {
        s.sigma2_inter = 0.0;
        s.sigma2_intra = 0.0;
    }
    return s;
}

std::string summary_to_json(const EvalSummary& s) {
    json j;
    j["miou"] = s.miou;
    json pc = json::array();
    for (double v : s.per_class_iou) {
        if (std::isnan(v))
            pc.push_back(nullptr);
        else
            pc.push_back(v);
    }
    j["per_class_iou"] = pc;
    j["temporal_consistency"] = s.temporal_consistency;
    j["sigma2_inter"] = s.sigma2_inter;
    j["sigma2_intra"] = s.sigma2_intra;
    j["pixels"] = s.pixels;
    return j.dump();
}

std::string summary_to_text(const EvalSummary& s) {
    std::ostringstream os;
    os << "class    IoU\n";
    for (size_t c = 0; c < s.per_class_iou.size(); ++c) {
        os << "  " << c << "      ";
        if (std::isnan(s.per_class_iou[c]))
            os << "  --\n";
        else {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.4f", s.per_class_iou[c]);
            os << buf << "\n";
        }
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "mIoU %.4f | temporal consistency %.4f | sigma2_inter %.3f | sigma2_intra %.3f\n",
                  s.miou, s.temporal_consistency, s.sigma2_inter, s.sigma2_intra);
    os << buf;
    return os.str();
}

} // namespace davsn::evalkit
