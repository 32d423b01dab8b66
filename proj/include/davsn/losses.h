#pragma once

#include "davsn/autodiff.h"
#include "davsn/discriminators.h"
#include "davsn/flowwarp.h"

namespace davsn::losses {

inline constexpr double kScoreEps = 1e-7;  // clamp inside adversarial logs

// Per-step objective terms. ctcr = sta + lambda_sa*sa + lambda_wd*wd when all
// parts were computed; inactive terms stay 0.
struct LossBundle {
    double ssl = 0.0;
    double sa = 0.0;
    double sta = 0.0;
    double wd = 0.0;
    double ctcr = 0.0;
    double itcr = 0.0;
    double total = 0.0;
    double gate_fraction = 0.0;

    bool all_finite() const;
};

// mean per-pixel cross-entropy -log p[y]; p is a [C,H,W] probability map.
double loss_ssl(const Tensor& p, const LabelMap& labels);

// Shannon entropy per pixel, natural log, 0*ln 0 := 0.
Tensor entropy_map(const Tensor& p);  // -> [H,W]

// log(score_src) + log(1 - score_tgt), scores clamped to [eps, 1-eps].
// Discriminators ascend this; the generator side enters through Eq. 6.
double loss_sa(double score_src, double score_tgt, double eps = kScoreEps);
// Identical form over the stacked-prediction discriminator.
double loss_sta(double score_src_stack, double score_tgt_stack, double eps = kScoreEps);

// (1/J) sum_j cos(w_st^j, w_s^j) over the shared-shape layers j = 2..J_total.
// Differentiable counterpart in loss_wd_graph. Throws on a zero-norm layer.
double loss_wd(const disc::DiscParams& params_st, const disc::DiscParams& params_s);

double loss_ctcr(double sa, double sta, double wd, double lambda_sa, double lambda_wd);

struct ItcrResult {
    double loss = 0.0;
    double gate_fraction = 0.0;
};

// Entropy-gated L1 between the current prediction and the propagated one;
// gate opens where E(p_k) - E(p_hat) > 0, restricted to valid pixels; mean
// over valid pixels. p_hat is a fixed target (no gradient path).
ItcrResult loss_itcr(const Tensor& p_k, const Tensor& p_hat_km1, const ByteMask& valid);

struct GateInfo {
    ByteMask gate;        // 1 where the penalty is active
    int64_t n_valid = 0;
    double gate_fraction = 0.0;
};
GateInfo compute_itcr_gate(const Tensor& p_k, const Tensor& p_hat_km1, const ByteMask& valid);

struct ObjectiveParts {
    double ssl = 0.0;
    double sa = 0.0;      // Eq. 1 value (discriminator view)
    double sta = 0.0;     // Eq. 2 value
    double wd = 0.0;      // Eq. 3 value
    double itcr = 0.0;    // Eq. 5 value
    double ctcr_g = 0.0;  // generator-side adversarial combination
};

struct Objective {
    double gen_loss = 0.0;
    double disc_loss = 0.0;
};

// gen_loss = ssl + lambda_u*ctcr_g + lambda_u*itcr. disc_loss is the
// minimization view of the discriminator ascent: -(sta + lambda_sa*sa) +
// lambda_wd*wd (the discriminators descend the cosine).
Objective assemble_objective(const ObjectiveParts& parts, double lambda_sa, double lambda_wd,
                             double lambda_u);

// ---- graph-side builders used by the trainer ----

// log(clamp(sigmoid(.), eps, 1-eps)) reduced over the response: the pooled
// scalar route when patch == false, the per-cell mean when true.
ad::Var adv_log_d(ad::Var response, bool patch, double eps = kScoreEps);
ad::Var adv_log_one_minus_d(ad::Var response, bool patch, double eps = kScoreEps);

// Eq. 3 over bound discriminator weights (differentiable w.r.t. both sets).
ad::Var loss_wd_graph(ad::Graph& g, const disc::BoundDisc& d_st, const disc::BoundDisc& d_s);

} // namespace davsn::losses
