#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "davsn/flowwarp.h"
#include "davsn/segnet.h"
#include "davsn/synthdata.h"

namespace davsn::evalkit {

// CxC counts, rows = ground truth, columns = prediction.
struct ConfusionMatrix {
    int num_classes = 0;
    std::vector<int64_t> counts;

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(int c) : num_classes(c), counts(static_cast<size_t>(c) * c, 0) {}
    int64_t& at(int truth, int pred) { return counts[static_cast<size_t>(truth) * num_classes + pred]; }
    int64_t at(int truth, int pred) const { return counts[static_cast<size_t>(truth) * num_classes + pred]; }
    int64_t total() const;
    void add(const ConfusionMatrix& o);
    void accumulate(const LabelMap& truth, const LabelMap& pred);
};

struct MiouResult {
    std::vector<double> per_class;  // NaN for classes absent from gt and pred
    double mean = 0.0;
};

// IoU_c = cm[c][c] / (row_c + col_c - cm[c][c]); zero-union classes are
// excluded from the mean. Throws when every class is absent.
MiouResult miou(const ConfusionMatrix& cm);

// Fraction of valid non-occluded pixels where argmax(p_k) agrees with the
// argmax of the backward-warped p_km1. `occ_valid` uses 1 = trustworthy.
double temporal_consistency(const Tensor& p_k, const Tensor& p_km1, const flowwarp::FlowField& flow_bwd,
                            const ByteMask& occ_valid);

struct VarianceResult {
    double inter = 0.0;
    double intra = 0.0;
};

// features: N x D row-major matrix of per-pixel temporal feature vectors,
// labels: N class ids. sigma2_intra = mean over classes of mean squared
// distance to the class centroid; sigma2_inter = mean squared distance of
// class centroids to their unweighted mean. Throws when < 2 classes present.
VarianceResult feature_variance(const std::vector<double>& features, int feature_dim,
                                const std::vector<int>& labels);

struct EvalSummary {
    double miou = 0.0;
    std::vector<double> per_class_iou;
    double temporal_consistency = 0.0;
    double sigma2_inter = 0.0;
    double sigma2_intra = 0.0;
    int64_t pixels = 0;
};

enum class EvalFlow { Oracle, Estimated };

// Runs the model over every labelled frame k >= 1 of each clip, accumulating
// mIoU, temporal consistency of consecutive predictions, and the inter/intra
// variance of stacked consecutive pre-softmax features (subsampled stride 4).
EvalSummary evaluate_model(const segnet::ParamSet& params, const std::vector<synthdata::VideoClip>& clips,
                           EvalFlow flow_source = EvalFlow::Oracle, double tau_occ = 1.0);

std::string summary_to_json(const EvalSummary& s);
// Per-class IoU table in the layout of the comparison tables.
std::string summary_to_text(const EvalSummary& s);

} // namespace davsn::evalkit
