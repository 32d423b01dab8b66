#include "davsn/trainer.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;
using json = nlohmann::json;

namespace davsn::trainer {

std::string mode_name(Mode m) {
    switch (m) {
        case Mode::SourceOnly: return "source_only";
        case Mode::SA: return "sa";
        case Mode::STA: return "sta";
        case Mode::JT: return "jt";
        case Mode::CTCR: return "ctcr";
        case Mode::ITCR: return "itcr";
        case Mode::DAVSN: return "davsn";
    }
    return "?";
}

Mode mode_from_name(const std::string& s) {
    if (s == "source_only") return Mode::SourceOnly;
    if (s == "sa") return Mode::SA;
    if (s == "sta") return Mode::STA;
    if (s == "jt") return Mode::JT;
    if (s == "ctcr") return Mode::CTCR;
    if (s == "itcr") return Mode::ITCR;
    if (s == "davsn") return Mode::DAVSN;
    throw UsageError("unknown training mode '" + s + "'");
}

ModeGates gates_for(Mode m) {
    ModeGates g;
    switch (m) {
        case Mode::SourceOnly: break;
        case Mode::SA: g.ds = true; break;
        case Mode::STA: g.dst = true; break;
        case Mode::JT: g.ds = g.dst = true; break;
        case Mode::CTCR: g.ds = g.dst = g.wd = true; break;
        case Mode::ITCR: g.itcr = true; break;
        case Mode::DAVSN: g.ds = g.dst = g.wd = g.itcr = true; break;
    }
    return g;
}

double poly_lr(int64_t step, double lr0, int64_t total_steps, double power) {
    if (step < 0 || step > total_steps)
        throw NumericError("poly_lr: step " + std::to_string(step) + " outside [0, " +
                           std::to_string(total_steps) + "]");
    if (step == total_steps) return 0.0;
    return lr0 * std::pow(1.0 - static_cast<double>(step) / static_cast<double>(total_steps), power);
}

void TrainConfig::validate() const {
    if (total_steps < 0) throw UsageError("total_steps must be >= 0");
    if (lr0 <= 0.0) throw UsageError("lr0 must be > 0");
    if (batch_source < 1 || batch_target < 1) throw UsageError("batch sizes must be >= 1");
    if (itcr_frame_gap < 1 || itcr_frame_gap > 2)
        throw UsageError("itcr_frame_gap supports 1 or 2 (stored flows cover consecutive pairs)");
    if (lambda_u < 0.0) throw UsageError("lambda_u must be >= 0");
    seg.validate();
}

TrainState init_train_state(const TrainConfig& cfg) {
    cfg.validate();
    TrainState st;
    st.cfg = cfg;
    st.gen = segnet::init_params(cfg.seg, cfg.seed);

    disc::DiscConfig ds_cfg;
    ds_cfg.input_channels = cfg.seg.num_classes;
    ds_cfg.base_channels = cfg.disc_base_channels;
    ds_cfg.num_layers = cfg.disc_num_layers;
    ds_cfg.patch_scores = cfg.disc_patch_scores;
    disc::DiscConfig dst_cfg = ds_cfg;
    dst_cfg.input_channels = 2 * cfg.seg.num_classes;
    st.d_s = disc::init_disc(ds_cfg, cfg.seed ^ 0x5D5C5B5A59585756ull);
    st.d_st = disc::init_disc(dst_cfg, cfg.seed ^ 0xA3A2A1A09F9E9D9Cull);

    for (const auto& p : st.gen.params) st.gen_m.push_back(Tensor(p.value.dims()));
    for (const auto& w : st.d_s.weights) st.d_s_mw.push_back(Tensor(w.dims()));
    for (const auto& b : st.d_s.biases) st.d_s_mb.push_back(Tensor(b.dims()));
    for (const auto& w : st.d_st.weights) st.d_st_mw.push_back(Tensor(w.dims()));
    for (const auto& b : st.d_st.biases) st.d_st_mb.push_back(Tensor(b.dims()));
    st.rng = Rng(cfg.seed ^ 0x1357246813572468ull);
    return st;
}

namespace {

void sgd_update(Tensor& param, Tensor& moment, const Tensor& grad, double lr, double momentum,
                double weight_decay) {
    for (int64_t i = 0; i < param.size(); ++i) {
        const double g = grad[i] + weight_decay * param[i];
        moment[i] = momentum * moment[i] + g;
        param[i] -= lr * moment[i];
    }
}

bool is_bias_name(const std::string& name) {
    return name.size() >= 2 && name.compare(name.size() - 2, 2, "_b") == 0;
}

void check_term(double v, const char* term, int64_t step) {
    if (!std::isfinite(v))
        throw NumericError(std::string("non-finite ") + term + " at step " + std::to_string(step));
}

struct PairInputs {
    flowwarp::FlowField flow_k;    // pair (k-1, k), backward, on frame k grid
    flowwarp::FlowField flow_km1;  // pair (k-2, k-1)
    ByteMask occ_valid_k;          // 1 = trustworthy, pair (k-1, k)
};

PairInputs pair_inputs(const ClipTriple& t, FlowSource src, double tau_occ) {
    PairInputs pi;
    if (src == FlowSource::Oracle) {
        pi.flow_k = t.bwd(0);
        pi.flow_km1 = t.bwd(1);
        const ByteMask& occ = t.occ(0);
        pi.occ_valid_k = ByteMask(occ.height, occ.width, 0);
        for (int64_t i = 0; i < occ.size(); ++i)
            pi.occ_valid_k.v[static_cast<size_t>(i)] = occ.v[static_cast<size_t>(i)] ? 0 : 1;
    } else {
        pi.flow_k = flowwarp::estimate_flow(t.frame(0), t.frame(1));
        pi.flow_km1 = flowwarp::estimate_flow(t.frame(1), t.frame(2));
        const auto fwd = flowwarp::estimate_flow(t.frame(1), t.frame(0), {}, flowwarp::FlowDirection::Forward);
        pi.occ_valid_k = flowwarp::occlusion_mask(fwd, pi.flow_k, tau_occ).m;
    }
    return pi;
}

} // namespace

losses::LossBundle train_step(TrainState& st, const std::vector<ClipTriple>& source_batch,
                              const std::vector<ClipTriple>& target_batch) {
    return train_step_phases(st, source_batch, target_batch, true, true);
}

losses::LossBundle train_step_phases(TrainState& st, const std::vector<ClipTriple>& source_batch,
                                     const std::vector<ClipTriple>& target_batch, bool do_phase1,
                                     bool do_phase2) {
    const TrainConfig& cfg = st.cfg;
    const ModeGates gates = gates_for(cfg.mode);
    const bool adv_active = (gates.ds || gates.dst) && cfg.lambda_u != 0.0;
    const bool itcr_active = gates.itcr && cfg.lambda_u != 0.0;
    if (source_batch.empty() || target_batch.empty())
        throw DataError("train_step needs at least one source and one target triple");
    for (const auto& t : source_batch)
        if (t.k < 2) throw DataError("train_step: source triple needs k >= 2");
    for (const auto& t : target_batch)
        if (t.k < 2) throw DataError("train_step: target triple needs k >= 2");

    const int64_t sched_total = std::max<int64_t>(cfg.total_steps, 1);
    const int64_t sched_step = std::min(st.step, sched_total);
    const double lr = poly_lr(sched_step, cfg.lr0, sched_total, cfg.poly_power);
    const double dlr = poly_lr(sched_step, cfg.disc_lr(), sched_total, cfg.poly_power);

    ad::Graph g;
    segnet::BoundParams bp = segnet::bind(g, st.gen, true);

    // ---- generator forwards ----
    std::vector<segnet::PairForward> src_pk;
    std::vector<Tensor> src_pkm1;  // value-only, feeds the D_st stack
    std::vector<ad::Var> ssl_terms;
    for (const auto& t : source_batch) {
        PairInputs pi = pair_inputs(t, cfg.flow_source, cfg.tau_occ);
        segnet::PairForward f = segnet::forward_pair_graph(g, bp, t.frame(0), t.frame(1), pi.flow_k);
        ssl_terms.push_back(ad::nll_mean(f.prob, t.label_k()));
        if (gates.dst)
            src_pkm1.push_back(segnet::forward_pair(st.gen, t.frame(1), t.frame(2), pi.flow_km1).prob);
        src_pk.push_back(std::move(f));
    }

    std::vector<segnet::PairForward> tgt_pk, tgt_pkm1;
    std::vector<ad::Var> itcr_terms;
    double gate_fraction_sum = 0.0;
    for (const auto& t : target_batch) {
        PairInputs pi = pair_inputs(t, cfg.flow_source, cfg.tau_occ);
        segnet::PairForward fk = segnet::forward_pair_graph(g, bp, t.frame(0), t.frame(1), pi.flow_k);
        segnet::PairForward fkm1;
        if (gates.dst || itcr_active)
            fkm1 = segnet::forward_pair_graph(g, bp, t.frame(1), t.frame(2), pi.flow_km1);

        if (itcr_active) {
            // current prediction for Eq. 5: the (x_k, x_{k-l}) pair
            const segnet::PairForward* cur = &fk;
            segnet::PairForward fgap;
            if (cfg.itcr_frame_gap == 2) {
                auto [composed, cmask] = flowwarp::compose_backward(pi.flow_k, pi.flow_km1);
                (void)cmask;
                fgap = segnet::forward_pair_graph(g, bp, t.frame(0), t.frame(2), composed);
                cur = &fgap;
            }
            auto [p_hat, wmask] = flowwarp::backward_warp(fkm1.prob.val(), pi.flow_k);
            ByteMask valid(wmask.m.height, wmask.m.width, 0);
            for (int64_t i = 0; i < wmask.m.size(); ++i)
                valid.v[static_cast<size_t>(i)] =
                    (wmask.m.v[static_cast<size_t>(i)] && pi.occ_valid_k.v[static_cast<size_t>(i)]) ? 1 : 0;
            losses::GateInfo gi = losses::compute_itcr_gate(cur->prob.val(), p_hat, valid);
            itcr_terms.push_back(ad::gated_l1_mean(cur->prob, p_hat, gi.gate, gi.n_valid));
            gate_fraction_sum += gi.gate_fraction;
        }
        tgt_pk.push_back(std::move(fk));
        if (gates.dst || itcr_active) tgt_pkm1.push_back(std::move(fkm1));
    }

    losses::LossBundle bundle;
    const size_t n_pairs = std::max(source_batch.size(), target_batch.size());

    // ---- phase 1: discriminator ascent on detached predictions ----
    if (do_phase1 && adv_active) {
        ad::Graph dg;
        disc::BoundDisc bds, bdst;
        if (gates.ds) bds = disc::bind(dg, st.d_s, true);
        if (gates.dst) bdst = disc::bind(dg, st.d_st, true);

        ad::Var ascend = dg.constant(0.0);
        ad::Var sa_acc = dg.constant(0.0);
        ad::Var sta_acc = dg.constant(0.0);
        for (size_t i = 0; i < n_pairs; ++i) {
            const auto& ps_k = src_pk[i % src_pk.size()];
            const auto& pt_k = tgt_pk[i % tgt_pk.size()];
            if (gates.ds) {
                ad::Var rs = disc::disc_response_graph(dg, bds, dg.constant(ps_k.prob.val()));
                ad::Var rt = disc::disc_response_graph(dg, bds, dg.constant(pt_k.prob.val()));
                ad::Var term = ad::s_add(losses::adv_log_d(rs, cfg.disc_patch_scores),
                                         losses::adv_log_one_minus_d(rt, cfg.disc_patch_scores));
                sa_acc = ad::s_add(sa_acc, term);
            }
            if (gates.dst) {
                ad::Var ss = ad::concat_channels(dg.constant(src_pkm1[i % src_pkm1.size()]),
                                                 dg.constant(ps_k.prob.val()));
                ad::Var ts = ad::concat_channels(dg.constant(tgt_pkm1[i % tgt_pkm1.size()].prob.val()),
                                                 dg.constant(pt_k.prob.val()));
                ad::Var rs = disc::disc_response_graph(dg, bdst, ss);
                ad::Var rt = disc::disc_response_graph(dg, bdst, ts);
                ad::Var term = ad::s_add(losses::adv_log_d(rs, cfg.disc_patch_scores),
                                         losses::adv_log_one_minus_d(rt, cfg.disc_patch_scores));
                sta_acc = ad::s_add(sta_acc, term);
            }
        }
        const double inv_pairs = 1.0 / static_cast<double>(n_pairs);
        sa_acc = ad::scale(sa_acc, inv_pairs);
        sta_acc = ad::scale(sta_acc, inv_pairs);
        ascend = ad::s_add(sta_acc, ad::scale(sa_acc, cfg.lambda_sa));

        ad::Var d_loss = ad::scale(ascend, -1.0);
        if (gates.wd) {
            ad::Var wd_var = losses::loss_wd_graph(dg, bdst, bds);
            bundle.wd = wd_var.scalar();
            d_loss = ad::s_add(d_loss, ad::scale(wd_var, cfg.lambda_wd));
        }
        bundle.sa = gates.ds ? sa_acc.scalar() : 0.0;
        bundle.sta = gates.dst ? sta_acc.scalar() : 0.0;
        check_term(bundle.sa, "loss_sa", st.step);
        check_term(bundle.sta, "loss_sta", st.step);
        check_term(bundle.wd, "loss_wd", st.step);

        dg.backward(d_loss);
        if (gates.ds) {
            for (size_t i = 0; i < st.d_s.weights.size(); ++i)
                sgd_update(st.d_s.weights[i], st.d_s_mw[i], dg.grad(bds.w[i]), dlr, cfg.momentum,
                           cfg.weight_decay);
            for (size_t i = 0; i < st.d_s.biases.size(); ++i)
                sgd_update(st.d_s.biases[i], st.d_s_mb[i], dg.grad(bds.b[i]), dlr, cfg.momentum, 0.0);
        }
        if (gates.dst) {
            for (size_t i = 0; i < st.d_st.weights.size(); ++i)
                sgd_update(st.d_st.weights[i], st.d_st_mw[i], dg.grad(bdst.w[i]), dlr, cfg.momentum,
                           cfg.weight_decay);
            for (size_t i = 0; i < st.d_st.biases.size(); ++i)
                sgd_update(st.d_st.biases[i], st.d_st_mb[i], dg.grad(bdst.b[i]), dlr, cfg.momentum, 0.0);
        }
    }

    // ---- phase 2: generator descent with discriminators frozen ----
    if (do_phase2) {
        ad::Var gen_loss = g.constant(0.0);
        ad::Var ssl_sum = g.constant(0.0);
        for (ad::Var t : ssl_terms) ssl_sum = ad::s_add(ssl_sum, t);
        ssl_sum = ad::scale(ssl_sum, 1.0 / static_cast<double>(ssl_terms.size()));
        bundle.ssl = ssl_sum.scalar();
        check_term(bundle.ssl, "loss_ssl", st.step);
        gen_loss = ad::s_add(gen_loss, ssl_sum);

        if (adv_active) {
            disc::BoundDisc bds2, bdst2;
            if (gates.ds) bds2 = disc::bind(g, st.d_s, false);
            if (gates.dst) bdst2 = disc::bind(g, st.d_st, false);
            ad::Var adv = g.constant(0.0);
            // only the fooling term on target predictions reaches G
            for (size_t i = 0; i < tgt_pk.size(); ++i) {
                const auto& pt = tgt_pk[i];
                ad::Var item = g.constant(0.0);
                if (gates.dst) {
                    ad::Var ts = ad::concat_channels(tgt_pkm1[i].prob, pt.prob);
                    ad::Var rt = disc::disc_response_graph(g, bdst2, ts);
                    ad::Var term = cfg.gan_saturating
                                       ? losses::adv_log_one_minus_d(rt, cfg.disc_patch_scores)
                                       : ad::scale(losses::adv_log_d(rt, cfg.disc_patch_scores), -1.0);
                    item = ad::s_add(item, term);
                }
                if (gates.ds) {
                    ad::Var rt = disc::disc_response_graph(g, bds2, pt.prob);
                    ad::Var term = cfg.gan_saturating
                                       ? losses::adv_log_one_minus_d(rt, cfg.disc_patch_scores)
                                       : ad::scale(losses::adv_log_d(rt, cfg.disc_patch_scores), -1.0);
                    item = ad::s_add(item, ad::scale(term, cfg.lambda_sa));
                }
                adv = ad::s_add(adv, item);
            }
            adv = ad::scale(adv, 1.0 / static_cast<double>(target_batch.size()));
            check_term(adv.scalar(), "generator adversarial term", st.step);
            gen_loss = ad::s_add(gen_loss, ad::scale(adv, cfg.lambda_u));
        }

        if (itcr_active) {
            ad::Var itcr_sum = g.constant(0.0);
            for (ad::Var t : itcr_terms) itcr_sum = ad::s_add(itcr_sum, t);
            itcr_sum = ad::scale(itcr_sum, 1.0 / static_cast<double>(itcr_terms.size()));
            bundle.itcr = itcr_sum.scalar();
            check_term(bundle.itcr, "loss_itcr", st.step);
            gen_loss = ad::s_add(gen_loss, ad::scale(itcr_sum, cfg.lambda_u));
            bundle.gate_fraction = gate_fraction_sum / static_cast<double>(itcr_terms.size());
        }

        bundle.total = gen_loss.scalar();
        check_term(bundle.total, "total generator loss", st.step);
        g.zero_grads();
        g.backward(gen_loss);
        for (size_t i = 0; i < st.gen.params.size(); ++i) {
            const Tensor grad = g.grad(bp.vars[i]);
            const double wd = is_bias_name(st.gen.params[i].name) ? 0.0 : cfg.weight_decay;
            sgd_update(st.gen.params[i].value, st.gen_m[i], grad, lr, cfg.momentum, wd);
        }
        st.gen.step = st.step + 1;
    }

    bundle.ctcr = losses::loss_ctcr(bundle.sa, bundle.sta, bundle.wd, cfg.lambda_sa, cfg.lambda_wd);
    st.step += 1;
    return bundle;
}

// ---- full runs ----

namespace {

std::string metrics_line(int64_t step, double lr, const losses::LossBundle& b) {
    ordered_json j;
    j["step"] = step;
    j["lr"] = lr;
    j["ssl"] = b.ssl;
    j["sa"] = b.sa;
    j["sta"] = b.sta;
    j["wd"] = b.wd;
    j["ctcr"] = b.ctcr;
    j["itcr"] = b.itcr;
    j["total"] = b.total;
    j["gate_fraction"] = b.gate_fraction;
    return j.dump();
}

std::string eval_line(int64_t step, const evalkit::EvalSummary& s) {
    ordered_json j;
    j["step"] = step;
    j["miou_target"] = s.miou;
    ordered_json pc = ordered_json::array();
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
    return j.dump();
}

ClipTriple sample_triple(const std::vector<synthdata::VideoClip>& clips, Rng& rng) {
    const auto& clip = clips[static_cast<size_t>(rng.uniform_int(static_cast<int64_t>(clips.size())))];
    const int k = 2 + static_cast<int>(rng.uniform_int(clip.num_frames - 2));
    return ClipTriple{&clip, k};
}

} // namespace

RunResult run_training(const TrainConfig& cfg, const std::vector<synthdata::VideoClip>& source,
                       const std::vector<synthdata::VideoClip>& target,
                       const std::vector<synthdata::VideoClip>& eval_clips, const RunControl& ctl) {
    cfg.validate();
    if (source.empty() || target.empty()) throw DataError("run_training: empty source or target dataset");
    if (eval_clips.empty()) throw DataError("run_training: empty evaluation dataset");
    fs::create_directories(ctl.out_dir);

    TrainState st;
    bool resumed = false;
    if (!ctl.resume_from.empty()) {
        st = load_train_state(ctl.resume_from);
        resumed = true;
    } else {
        st = init_train_state(cfg);
    }

    const fs::path metrics_path = fs::path(ctl.out_dir) / "metrics.jsonl";
    std::ofstream metrics(metrics_path,
                          resumed ? (std::ios::out | std::ios::app) : std::ios::out);
    if (!metrics) throw DataError("cannot open metrics log: " + metrics_path.string());

    const evalkit::EvalFlow eflow = st.cfg.flow_source == FlowSource::Oracle ? evalkit::EvalFlow::Oracle
                                                                             : evalkit::EvalFlow::Estimated;

    while (st.step < st.cfg.total_steps) {
        const int64_t step_idx = st.step;
        const double lr = poly_lr(std::min(step_idx, st.cfg.total_steps), st.cfg.lr0,
                                  std::max<int64_t>(st.cfg.total_steps, 1), st.cfg.poly_power);
        std::vector<ClipTriple> sb, tb;
        for (int i = 0; i < st.cfg.batch_source; ++i) sb.push_back(sample_triple(source, st.rng));
        for (int i = 0; i < st.cfg.batch_target; ++i) tb.push_back(sample_triple(target, st.rng));
        losses::LossBundle b = train_step(st, sb, tb);
        metrics << metrics_line(step_idx, lr, b) << "\n";

        if (ctl.eval_every > 0 && st.step % ctl.eval_every == 0 && st.step < st.cfg.total_steps) {
            evalkit::EvalSummary s = evalkit::evaluate_model(st.gen, eval_clips, eflow, st.cfg.tau_occ);
            metrics << eval_line(st.step, s) << "\n";
            metrics.flush();
        }
        if (ctl.ckpt_every > 0 && st.step % ctl.ckpt_every == 0 && st.step < st.cfg.total_steps) {
            save_train_state(st, (fs::path(ctl.out_dir) / ("ckpt_step_" + std::to_string(st.step) + ".bin"))
                                     .string());
        }
    }

    RunResult rr;
    rr.final_eval = evalkit::evaluate_model(st.gen, eval_clips, eflow, st.cfg.tau_occ);
    metrics << eval_line(st.step, rr.final_eval) << "\n";
    metrics.close();
    rr.metrics_path = metrics_path.string();
    rr.checkpoint_path = (fs::path(ctl.out_dir) / "ckpt_final.bin").string();
    save_train_state(st, rr.checkpoint_path);
    return rr;
}

// ---- state serialization ----

namespace {

json config_to_json(const TrainConfig& c) {
    json j;
    j["mode"] = mode_name(c.mode);
    j["lambda_sa"] = c.lambda_sa;
    j["lambda_wd"] = c.lambda_wd;
    j["lambda_u"] = c.lambda_u;
    j["lr0"] = c.lr0;
    j["disc_lr0"] = c.disc_lr0;
    j["total_steps"] = c.total_steps;
    j["poly_power"] = c.poly_power;
    j["momentum"] = c.momentum;
    j["weight_decay"] = c.weight_decay;
    j["batch_source"] = c.batch_source;
    j["batch_target"] = c.batch_target;
    j["seed"] = c.seed;
    j["flow_source"] = c.flow_source == FlowSource::Oracle ? "oracle" : "estimated";
    j["gan_saturating"] = c.gan_saturating;
    j["itcr_frame_gap"] = c.itcr_frame_gap;
    j["tau_occ"] = c.tau_occ;
    j["num_classes"] = c.seg.num_classes;
    j["base_channels"] = c.seg.base_channels;
    j["num_down_levels"] = c.seg.num_down_levels;
    j["shared_branches"] = c.seg.shared_branches;
    j["disc_base_channels"] = c.disc_base_channels;
    j["disc_num_layers"] = c.disc_num_layers;
    j["disc_patch_scores"] = c.disc_patch_scores;
    return j;
}

TrainConfig config_from_json(const json& j) {
    TrainConfig c;
    c.mode = mode_from_name(j.at("mode").get<std::string>());
    c.lambda_sa = j.at("lambda_sa").get<double>();
    c.lambda_wd = j.at("lambda_wd").get<double>();
    c.lambda_u = j.at("lambda_u").get<double>();
    c.lr0 = j.at("lr0").get<double>();
    c.disc_lr0 = j.at("disc_lr0").get<double>();
    c.total_steps = j.at("total_steps").get<int64_t>();
    c.poly_power = j.at("poly_power").get<double>();
    c.momentum = j.at("momentum").get<double>();
    c.weight_decay = j.at("weight_decay").get<double>();
    c.batch_source = j.at("batch_source").get<int>();
    c.batch_target = j.at("batch_target").get<int>();
    c.seed = j.at("seed").get<uint64_t>();
    c.flow_source =
        j.at("flow_source").get<std::string>() == "oracle" ? FlowSource::Oracle : FlowSource::Estimated;
    c.gan_saturating = j.at("gan_saturating").get<bool>();
    c.itcr_frame_gap = j.at("itcr_frame_gap").get<int>();
    c.tau_occ = j.at("tau_occ").get<double>();
    c.seg.num_classes = j.at("num_classes").get<int>();
    c.seg.base_channels = j.at("base_channels").get<int>();
    c.seg.num_down_levels = j.at("num_down_levels").get<int>();
    c.seg.shared_branches = j.at("shared_branches").get<bool>();
    c.disc_base_channels = j.at("disc_base_channels").get<int>();
    c.disc_num_layers = j.at("disc_num_layers").get<int>();
    c.disc_patch_scores = j.at("disc_patch_scores").get<bool>();
    return c;
}

void push_tensors(std::vector<io::NamedRecord>& recs, const std::string& prefix,
                  const std::vector<Tensor>& ts) {
    for (size_t i = 0; i < ts.size(); ++i) {
        io::NamedRecord r;
        r.name = prefix + std::to_string(i);
        r.dtype = io::DType::F64;
        r.tensor = ts[i];
        recs.push_back(std::move(r));
    }
}

} // namespace

void save_train_state(const TrainState& st, const std::string& path) {
    std::vector<io::NamedRecord> recs;
    {
        io::NamedRecord r;
        r.name = "meta";
        r.dtype = io::DType::Bytes;
        json meta = {{"ckpt_version", segnet::kCheckpointVersion}, {"kind", "davsn_train_state"}};
        meta["config"] = config_to_json(st.cfg);
        r.bytes = meta.dump();
        recs.push_back(std::move(r));
    }
    {
        io::NamedRecord r;
        r.name = "step";
        r.dtype = io::DType::I64;
        r.ints = {st.step, st.gen.step};
        recs.push_back(std::move(r));
    }
    {
        io::NamedRecord r;
        r.name = "rng";
        r.dtype = io::DType::Bytes;
        r.bytes = st.rng.serialize();
        recs.push_back(std::move(r));
    }
    for (const auto& p : st.gen.params) {
        io::NamedRecord r;
        r.name = "gen:" + p.name;
        r.dtype = io::DType::F64;
        r.tensor = p.value;
        recs.push_back(std::move(r));
    }
    push_tensors(recs, "genm:", st.gen_m);
    push_tensors(recs, "ds:w", st.d_s.weights);
    push_tensors(recs, "ds:b", st.d_s.biases);
    push_tensors(recs, "dsm:w", st.d_s_mw);
    push_tensors(recs, "dsm:b", st.d_s_mb);
    push_tensors(recs, "dst:w", st.d_st.weights);
    push_tensors(recs, "dst:b", st.d_st.biases);
    push_tensors(recs, "dstm:w", st.d_st_mw);
    push_tensors(recs, "dstm:b", st.d_st_mb);

    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open checkpoint for writing: " + path);
    io::write_container(f, recs);
    if (!f) throw DataError("checkpoint write failed: " + path);
}

TrainState load_train_state(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("checkpoint not found: " + path);
    auto recs = io::read_container(f, path);

    TrainConfig cfg;
    bool meta_seen = false;
    for (const auto& r : recs) {
        if (r.name != "meta") continue;
        json meta;
        try {
            meta = json::parse(r.bytes);
        } catch (const json::exception& e) {
            throw DataError("corrupt checkpoint meta in " + path + ": " + e.what());
        }
        const int ver = meta.value("ckpt_version", -1);
        if (ver != segnet::kCheckpointVersion)
            throw DataError("checkpoint version mismatch in " + path + ": found " + std::to_string(ver));
        if (meta.value("kind", "") != "davsn_train_state")
            throw DataError("not a training-state checkpoint: " + path);
        cfg = config_from_json(meta.at("config"));
        meta_seen = true;
    }
    if (!meta_seen) throw DataError("checkpoint missing meta record: " + path);

    TrainState st = init_train_state(cfg);
    auto grab = [&](const std::string& prefix, std::vector<Tensor>& out) {
        size_t idx = 0;
        for (const auto& r : recs) {
            if (r.name.rfind(prefix, 0) != 0) continue;
            const size_t i = static_cast<size_t>(std::stoul(r.name.substr(prefix.size())));
            if (i >= out.size()) throw DataError("unexpected record " + r.name + " in " + path);
            if (!out[i].same_shape(r.tensor)) throw DataError("shape mismatch for " + r.name + " in " + path);
            out[i] = r.tensor;
            ++idx;
        }
        if (idx != out.size()) throw DataError("missing records under " + prefix + " in " + path);
    };

    for (const auto& r : recs) {
        if (r.name == "step") {
            st.step = r.ints.at(0);
            st.gen.step = r.ints.at(1);
        } else if (r.name == "rng") {
            st.rng.deserialize(r.bytes);
        } else if (r.name.rfind("gen:", 0) == 0) {
            Tensor* p = st.gen.find(r.name.substr(4));
            if (!p) throw DataError("unknown generator parameter " + r.name + " in " + path);
            if (!p->same_shape(r.tensor)) throw DataError("shape mismatch for " + r.name + " in " + path);
            *p = r.tensor;
        }
    }
    grab("genm:", st.gen_m);
    grab("ds:w", st.d_s.weights);
    grab("ds:b", st.d_s.biases);
    grab("dsm:w", st.d_s_mw);
    grab("dsm:b", st.d_s_mb);
    grab("dst:w", st.d_st.weights);
    grab("dst:b", st.d_st.biases);
    grab("dstm:w", st.d_st_mw);
    grab("dstm:b", st.d_st_mb);
    return st;
}

} // namespace davsn::trainer
