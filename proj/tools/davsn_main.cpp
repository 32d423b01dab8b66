#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "davsn/commands.h"

using namespace davsn;

int main(int argc, char** argv) {
    CLI::App app{"domain-adaptive video segmentation on a synthetic paired-domain benchmark"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    app.add_option("-c,--config", config_path, "flat key = value config file");
    app.add_option("-s,--set", overrides, "key=value override (wins over the file)");

    auto* gen = app.add_subcommand("gen", "generate the paired-domain synthetic datasets");
    auto* train = app.add_subcommand("train", "run one training configuration");
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    std::string ckpt_path, dataset_dir;
    eval->add_option("checkpoint", ckpt_path, "training checkpoint")->required();
    eval->add_option("dataset", dataset_dir, "dataset directory")->required();
    auto* ablate = app.add_subcommand("ablate", "train all requested modes and tabulate");
    auto* plot = app.add_subcommand("plot", "emit SVG curves from a metrics log");
    std::string metrics_path;
    plot->add_option("metrics", metrics_path, "metrics.jsonl path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        cli::RunConfig cfg;
        if (!config_path.empty()) cfg = cli::load_config_file(config_path);
        cli::apply_overrides(cfg, overrides);

        if (gen->parsed()) {
            cli::cmd_generate(cfg);
        } else if (train->parsed()) {
            cli::cmd_train(cfg);
        } else if (eval->parsed()) {
            cli::cmd_eval(cfg, ckpt_path, dataset_dir);
        } else if (ablate->parsed()) {
            cli::cmd_ablate(cfg);
        } else if (plot->parsed()) {
            cli::cmd_plot(cfg, metrics_path);
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
