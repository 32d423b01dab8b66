#include "davsn/losses.h"

#include <cmath>

namespace davsn::losses {

bool LossBundle::all_finite() const {
    return std::isfinite(ssl) && std::isfinite(sa) && std::isfinite(sta) && std::isfinite(wd) &&
           std::isfinite(ctcr) && std::isfinite(itcr) && std::isfinite(total) &&
           std::isfinite(gate_fraction);
}

double loss_ssl(const Tensor& p, const LabelMap& labels) {
    ad::Graph g;
    return ad::nll_mean(g.constant(p), labels).scalar();
}

Tensor entropy_map(const Tensor& p) {
    if (p.ndim() != 3) throw NumericError("entropy_map expects [C,H,W]");
    const int C = p.dim(0);
    const int64_t hw = static_cast<int64_t>(p.dim(1)) * p.dim(2);
    Tensor e({p.dim(1), p.dim(2)});
    for (int64_t i = 0; i < hw; ++i) {
        double acc = 0.0;
        for (int c = 0; c < C; ++c) {
            const double v = p[c * hw + i];
            if (v > 0.0) acc -= v * std::log(v);
        }
        e[i] = acc;
    }
    return e;
}

namespace {

double clamped_log(double v, double eps) { return std::log(std::min(std::max(v, eps), 1.0 - eps)); }

} // namespace

double loss_sa(double score_src, double score_tgt, double eps) {
    return clamped_log(score_src, eps) + clamped_log(1.0 - score_tgt, eps);
}

double loss_sta(double score_src_stack, double score_tgt_stack, double eps) {
    return loss_sa(score_src_stack, score_tgt_stack, eps);
}

double loss_wd(const disc::DiscParams& params_st, const disc::DiscParams& params_s) {
    ad::Graph g;
    disc::BoundDisc bst = disc::bind(g, params_st, false);
    disc::BoundDisc bs = disc::bind(g, params_s, false);
    return loss_wd_graph(g, bst, bs).scalar();
}

double loss_ctcr(double sa, double sta, double wd, double lambda_sa, double lambda_wd) {
    if (!std::isfinite(sa) || !std::isfinite(sta) || !std::isfinite(wd))
        throw NumericError("loss_ctcr requires finite components");
    return sta + lambda_sa * sa + lambda_wd * wd;
}

GateInfo compute_itcr_gate(const Tensor& p_k, const Tensor& p_hat_km1, const ByteMask& valid) {
    if (!p_k.same_shape(p_hat_km1)) throw NumericError("loss_itcr shape mismatch");
    if (p_k.ndim() != 3 || valid.height != p_k.dim(1) || valid.width != p_k.dim(2))
        throw NumericError("loss_itcr mask shape mismatch");
    const Tensor ek = entropy_map(p_k);
    const Tensor eh = entropy_map(p_hat_km1);
    GateInfo gi;
    gi.gate = ByteMask(valid.height, valid.width, 0);
    int64_t n_gated = 0;
    for (int64_t i = 0; i < valid.size(); ++i) {
        if (!valid.v[static_cast<size_t>(i)]) continue;
        ++gi.n_valid;
        if (ek[i] - eh[i] > 0.0) {
            gi.gate.v[static_cast<size_t>(i)] = 1;
            ++n_gated;
        }
    }
    gi.gate_fraction = gi.n_valid > 0 ? static_cast<double>(n_gated) / static_cast<double>(gi.n_valid) : 0.0;
    return gi;
}

ItcrResult loss_itcr(const Tensor& p_k, const Tensor& p_hat_km1, const ByteMask& valid) {
    GateInfo gi = compute_itcr_gate(p_k, p_hat_km1, valid);
    ad::Graph g;
    const double loss =
        ad::gated_l1_mean(g.constant(p_k), p_hat_km1, gi.gate, gi.n_valid).scalar();
    return {loss, gi.gate_fraction};
}

Objective assemble_objective(const ObjectiveParts& parts, double lambda_sa, double lambda_wd,
                             double lambda_u) {
    Objective o;
    o.gen_loss = parts.ssl + lambda_u * parts.ctcr_g + lambda_u * parts.itcr;
    o.disc_loss = -(parts.sta + lambda_sa * parts.sa) + lambda_wd * parts.wd;
    return o;
}

ad::Var adv_log_d(ad::Var response, bool patch, double eps) {
    if (patch) return ad::logsig_mean(response, eps);
    ad::Var score = ad::s_sigmoid(ad::mean_all(response));
    return ad::s_log(ad::s_clamp(score, eps, 1.0 - eps));
}

ad::Var adv_log_one_minus_d(ad::Var response, bool patch, double eps) {
    if (patch) return ad::log1msig_mean(response, eps);
    ad::Var score = ad::s_sigmoid(ad::mean_all(response));
    ad::Var one_minus = ad::s_sub(response.g->constant(1.0), score);
    return ad::s_log(ad::s_clamp(one_minus, eps, 1.0 - eps));
}

ad::Var loss_wd_graph(ad::Graph& g, const disc::BoundDisc& d_st, const disc::BoundDisc& d_s) {
    const int total = d_st.dp->config.num_layers;
    if (total != d_s.dp->config.num_layers)
        throw NumericError("loss_wd: discriminators differ in depth");
    const int shared = disc::shared_layer_count(d_st.dp->config);
    if (shared < 1) throw NumericError("loss_wd: no shared-shape layers");
    ad::Var acc = g.constant(0.0);
    for (int j = 2; j <= total; ++j) {
        ad::Var a = d_st.w[static_cast<size_t>(j - 1)];
        ad::Var b = d_s.w[static_cast<size_t>(j - 1)];
        if (!a.val().same_shape(b.val()))
            throw NumericError("loss_wd: layer " + std::to_string(j) + " shapes differ");
        ad::Var na = ad::sum_sq(a);
        ad::Var nb = ad::sum_sq(b);
        if (na.scalar() == 0.0 || nb.scalar() == 0.0)
            throw NumericError("loss_wd: zero-norm weight vector at layer " + std::to_string(j));
        ad::Var cosj = ad::s_div(ad::dot_flat(a, b), ad::s_mul(ad::s_sqrt(na), ad::s_sqrt(nb)));
        acc = ad::s_add(acc, ad::s_clamp(cosj, -1.0, 1.0));
    }
    return ad::scale(acc, 1.0 / static_cast<double>(shared));
}

} // namespace davsn::losses
