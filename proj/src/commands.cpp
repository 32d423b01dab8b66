#include "davsn/commands.h"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "davsn/evalkit.h"
#include "davsn/plotting.h"
#include "davsn/trainer.h"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace davsn::cli {

namespace {

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string tok;
    while (std::getline(is, tok, ',')) {
        if (!tok.empty()) out.push_back(tok);
    }
    return out;
}

std::vector<synthdata::VideoClip> generate_domain(const RunConfig& cfg, synthdata::Domain domain,
                                                  int count, uint64_t seed0) {
    std::vector<synthdata::VideoClip> clips;
    clips.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
        synthdata::ClipSpec spec;
        spec.height = cfg.gen_height;
        spec.width = cfg.gen_width;
        spec.num_frames = cfg.gen_frames;
        spec.num_classes = cfg.num_classes;
        spec.num_objects = cfg.gen_objects;
        spec.motion.max_speed = cfg.gen_max_speed;
        spec.motion.integer_velocities = cfg.gen_integer_velocities;
        spec.seed = seed0 + static_cast<uint64_t>(i);
        spec.domain = domain;
        spec.shift = domain == synthdata::Domain::Source ? cfg.source_shift(spec.seed * 31 + 7)
                                                         : cfg.target_shift(spec.seed * 31 + 7);
        clips.push_back(synthdata::generate_clip(spec));
    }
    return clips;
}

std::string gen_echo(const RunConfig& cfg, const std::string& domain, int count, uint64_t seed0) {
    json j;
    j["domain"] = domain;
    j["count"] = count;
    j["seed0"] = seed0;
    j["height"] = cfg.gen_height;
    j["width"] = cfg.gen_width;
    j["frames"] = cfg.gen_frames;
    j["classes"] = cfg.num_classes;
    j["objects"] = cfg.gen_objects;
    return j.dump();
}

} // namespace

void cmd_generate(const RunConfig& cfg) {
    if (cfg.source_dir.empty() || cfg.target_dir.empty() || cfg.eval_dir.empty())
        throw UsageError("gen needs source_dir, target_dir and eval_dir");
    auto src = generate_domain(cfg, synthdata::Domain::Source, cfg.gen_clips_source, cfg.gen_seed_source);
    synthdata::write_dataset(src, cfg.source_dir,
                             gen_echo(cfg, "source", cfg.gen_clips_source, cfg.gen_seed_source));
    src.clear();
    auto tgt = generate_domain(cfg, synthdata::Domain::Target, cfg.gen_clips_target, cfg.gen_seed_target);
    synthdata::write_dataset(tgt, cfg.target_dir,
                             gen_echo(cfg, "target", cfg.gen_clips_target, cfg.gen_seed_target));
    tgt.clear();
    auto ev = generate_domain(cfg, synthdata::Domain::Target, cfg.gen_clips_eval, cfg.gen_seed_eval);
    synthdata::write_dataset(ev, cfg.eval_dir, gen_echo(cfg, "target", cfg.gen_clips_eval, cfg.gen_seed_eval));
    write_config_echo(cfg, cfg.out_dir);
    std::cout << "generated " << cfg.gen_clips_source << " source + " << cfg.gen_clips_target
              << " target + " << cfg.gen_clips_eval << " eval clips\n";
}

void cmd_train(const RunConfig& cfg) {
    trainer::TrainConfig tc = cfg.to_train_config();
    const auto source = synthdata::load_dataset(cfg.source_dir);
    const auto target = synthdata::load_dataset(cfg.target_dir);
    const auto eval_clips = synthdata::load_dataset(cfg.eval_dir);
    write_config_echo(cfg, cfg.out_dir);
    trainer::RunControl ctl;
    ctl.out_dir = cfg.out_dir;
    ctl.eval_every = cfg.eval_every;
    ctl.ckpt_every = cfg.ckpt_every;
    ctl.resume_from = cfg.resume_from;
    trainer::RunResult rr = trainer::run_training(tc, source, target, eval_clips, ctl);
    std::cout << "final checkpoint: " << rr.checkpoint_path << "\n";
    std::cout << evalkit::summary_to_text(rr.final_eval);
}

void cmd_eval(const RunConfig& cfg, const std::string& checkpoint, const std::string& dataset_dir) {
    trainer::TrainState st = trainer::load_train_state(checkpoint);
    const auto clips = synthdata::load_dataset(dataset_dir);
    const evalkit::EvalFlow flow = st.cfg.flow_source == trainer::FlowSource::Oracle
                                       ? evalkit::EvalFlow::Oracle
                                       : evalkit::EvalFlow::Estimated;
    const evalkit::EvalSummary s = evalkit::evaluate_model(st.gen, clips, flow, st.cfg.tau_occ);
    std::cout << evalkit::summary_to_text(s);
    fs::create_directories(cfg.out_dir);
    std::ofstream rf(fs::path(cfg.out_dir) / "eval_report.json");
    rf << evalkit::summary_to_json(s) << "\n";
}

std::vector<AblationRow> cmd_ablate(const RunConfig& cfg) {
    const auto modes = split_csv(cfg.ablate_modes);
    const auto seed_strs = split_csv(cfg.ablate_seeds);
    if (modes.empty() || seed_strs.empty()) throw UsageError("ablate needs modes and seeds");
    std::vector<uint64_t> seeds;
    for (const auto& s : seed_strs) seeds.push_back(std::stoull(s));

    const auto source = synthdata::load_dataset(cfg.source_dir);
    const auto target = synthdata::load_dataset(cfg.target_dir);
    const auto eval_clips = synthdata::load_dataset(cfg.eval_dir);
    write_config_echo(cfg, cfg.out_dir);

    struct Job {
        std::string mode;
        uint64_t seed;
        evalkit::EvalSummary result;
        std::string error;
    };
    std::vector<Job> jobs;
    for (const auto& m : modes)
        for (uint64_t s : seeds) jobs.push_back({m, s, {}, {}});

    std::atomic<size_t> next{0};
    const int workers = std::max(1, cfg.ablate_jobs);
    auto worker = [&]() {
        while (true) {
            const size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            Job& job = jobs[i];
            try {
                RunConfig rc = cfg;
                rc.mode = job.mode;
                rc.seed = job.seed;
                rc.out_dir = (fs::path(cfg.out_dir) / job.mode / ("seed_" + std::to_string(job.seed)))
                                 .string();
                trainer::TrainConfig tc = rc.to_train_config();
                trainer::RunControl ctl;
                ctl.out_dir = rc.out_dir;
                ctl.eval_every = rc.eval_every;
                ctl.ckpt_every = rc.ckpt_every;
                trainer::RunResult rr = trainer::run_training(tc, source, target, eval_clips, ctl);
                job.result = rr.final_eval;
                write_config_echo(rc, rc.out_dir);
            } catch (const std::exception& e) {
                job.error = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    for (const auto& j : jobs)
        if (!j.error.empty())
            throw NumericError("ablation run " + j.mode + "/seed_" + std::to_string(j.seed) +
                               " failed: " + j.error);

    std::vector<AblationRow> rows;
    for (const auto& m : modes) {
        AblationRow row;
        row.mode = m;
        for (const auto& j : jobs) {
            if (j.mode != m) continue;
            row.miou += j.result.miou;
            row.temporal_consistency += j.result.temporal_consistency;
            row.sigma2_inter += j.result.sigma2_inter;
            row.sigma2_intra += j.result.sigma2_intra;
            ++row.seeds;
        }
        row.miou /= row.seeds;
        row.temporal_consistency /= row.seeds;
        row.sigma2_inter /= row.seeds;
        row.sigma2_intra /= row.seeds;
        rows.push_back(row);
    }

    json jt = json::array();
    for (const auto& r : rows)
        jt.push_back({{"mode", r.mode},
                      {"miou", r.miou},
                      {"temporal_consistency", r.temporal_consistency},
                      {"sigma2_inter", r.sigma2_inter},
                      {"sigma2_intra", r.sigma2_intra},
                      {"seeds", r.seeds}});
    fs::create_directories(cfg.out_dir);
    std::ofstream jf(fs::path(cfg.out_dir) / "ablation_table.json");
    jf << jt.dump(2) << "\n";
    std::ofstream tf(fs::path(cfg.out_dir) / "ablation_table.txt");
    tf << ablation_table_text(rows);
    std::cout << ablation_table_text(rows);
    return rows;
}

void cmd_plot(const RunConfig& cfg, const std::string& metrics_path) {
    const auto files = plotting::plot_metrics(metrics_path, cfg.out_dir);
    for (const auto& f : files) std::cout << "wrote " << f << "\n";
}

std::string ablation_table_text(const std::vector<AblationRow>& rows) {
    std::ostringstream os;
    os << "mode          mIoU     TC       s2_inter  s2_intra  seeds\n";
    for (const auto& r : rows) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%-12s  %.4f   %.4f   %8.3f  %8.3f  %d\n", r.mode.c_str(),
                      r.miou, r.temporal_consistency, r.sigma2_inter, r.sigma2_intra, r.seeds);
        os << buf;
    }
    return os.str();
}

} // namespace davsn::cli
