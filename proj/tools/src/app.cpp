#include <exception>
#include <iostream>
#include <new>

#include <CLI11.hpp>

#include "mobgen/error.hpp"
#include "mobgen/parallel.hpp"
#include "mobgen_cli/commands.hpp"
#include "mobgen_cli/config_loader.hpp"

namespace mobgen::cli {

namespace {

constexpr const char* kEnvHelp =
    "Environment:\n"
    "  MOBGEN_SEED     replaces every seed of a config with streams of one master seed\n"
    "  MOBGEN_THREADS  worker cap when --threads is not given (default 1)\n"
    "Exit codes: 0 success, 2 configuration or usage error, 3 numeric failure, 4 I/O error.\n";

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Trajectory generation with collaborative noise priors on a synthetic grid city", "mobgen"};
    app.footer(kEnvHelp);
    app.require_subcommand(1);
    std::size_t threads = 0;
    app.add_option("--threads", threads, "cap on worker threads (0 keeps MOBGEN_THREADS or 1)");

    SynthCityOptions sc;
    auto* c_sc = app.add_subcommand("synth-city", "build the city, its flows and the training and holdout sets");
    c_sc->add_option("--config", sc.config, "run configuration (.yaml or .json)")->required();
    c_sc->add_option("--out", sc.out, "output directory")->required();
    c_sc->add_flag("--svg", sc.svg, "also render the flow heat map");

    TrainOptions tr;
    auto* c_tr = app.add_subcommand("train", "train the denoiser; writes the checkpoint and loss log");
    c_tr->add_option("--config", tr.config, "run configuration (.yaml or .json)")->required();
    c_tr->add_option("--data", tr.data, "directory written by synth-city")->required();
    c_tr->add_option("--out", tr.out, "output directory")->required();
    c_tr->add_flag("--svg", tr.svg, "also render the loss curves");

    GenerateOptions ge;
    auto* c_ge = app.add_subcommand("generate", "generate trajectories from a trained checkpoint");
    c_ge->add_option("--config", ge.config, "run configuration (.yaml or .json)")->required();
    c_ge->add_option("--data", ge.data, "directory written by synth-city")->required();
    c_ge->add_option("--checkpoint", ge.checkpoint, "checkpoint written by train")->required();
    c_ge->add_option("--out", ge.out, "output directory")->required();
    c_ge->add_option("--ablation", ge.ablation, "full, no_prior, no_fusion or all")
        ->check(CLI::IsMember({"full", "no_prior", "no_fusion", "all"}));
    c_ge->add_option("--n", ge.n, "number of trajectories (default from config)");
    c_ge->add_option("--seed", ge.seed, "generation seed (default from config)");
    c_ge->add_flag("--svg", ge.svg, "also render generated flow heat maps");

    EvaluateOptions ev;
    auto* c_ev = app.add_subcommand("evaluate", "compare a generated dataset with a real one");
    c_ev->add_option("--real", ev.real, "real dataset")->required();
    c_ev->add_option("--gen", ev.gen, "generated dataset")->required();
    c_ev->add_option("--out", ev.out, "output directory")->required();
    c_ev->add_option("--mape-averaging", ev.mape_averaging, "per_row or global");
    c_ev->add_flag("--svg", ev.svg, "also render ECDFs and the flow heat map");

    PrivacyOptions pr;
    auto* c_pr = app.add_subcommand("privacy", "uniqueness ECDF and membership inference audit");
    c_pr->add_option("--train", pr.train, "training set the model saw")->required();
    c_pr->add_option("--holdout", pr.holdout, "holdout set the model never saw")->required();
    c_pr->add_option("--gen", pr.gen, "generated dataset")->required();
    c_pr->add_option("--out", pr.out, "output directory")->required();
    c_pr->add_option("--members", pr.n_members, "member candidates");
    c_pr->add_option("--nonmembers", pr.n_nonmembers, "nonmember candidates");
    c_pr->add_option("--probes", pr.n_probe, "generated trajectories probed for uniqueness (0 = all)");
    c_pr->add_option("--seed", pr.seed, "audit seed");
    c_pr->add_flag("--svg", pr.svg, "also render the uniqueness ECDF");

    AnalyzeOptions an;
    auto* c_an = app.add_subcommand("analyze", "invert a dataset and relate its noise to its moves");
    c_an->add_option("--checkpoint", an.checkpoint, "checkpoint written by train")->required();
    c_an->add_option("--data", an.dataset, "dataset to invert")->required();
    c_an->add_option("--out", an.out, "output directory")->required();
    c_an->add_option("--steps", an.steps, "inversion steps");
    c_an->add_option("--max", an.max_trajectories, "use only the first N trajectories (0 = all)");
    c_an->add_option("--seed", an.seed, "seed of the shuffled-pair baseline");

    UtilityProbeOptions up;
    auto* c_up = app.add_subcommand(
        "utility-probe",
        "next-location accuracy of a first-order Markov predictor trained on real or mixed data; a simple "
        "stand-in for neural mobility predictors, not a reproduction of them");
    c_up->add_option("--real", up.real, "real training trajectories")->required();
    c_up->add_option("--gen", up.gen, "generated trajectories")->required();
    c_up->add_option("--test", up.test, "held-out real trajectories")->required();
    c_up->add_option("--out", up.out, "output directory")->required();
    c_up->add_option("--mix", up.mix, "share of the training set replaced by generated data, one or more values")
        ->expected(1, -1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        configure_allocator();
        if (threads > 0) set_thread_count(threads);
        if (*c_sc) cmd_synth_city(sc);
        else if (*c_tr) cmd_train(tr);
        else if (*c_ge) cmd_generate(ge);
        else if (*c_ev) cmd_evaluate(ev);
        else if (*c_pr) cmd_privacy(pr);
        else if (*c_an) cmd_analyze(an);
        else if (*c_up) cmd_utility_probe(up);
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const InvalidArgument& e) {
        std::cerr << "invalid argument: " << e.what() << '\n';
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return 3;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return 4;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return 4;
    } catch (const std::bad_alloc&) {
        std::cerr << "numeric failure: out of memory\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}

int run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("mobgen");
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace mobgen::cli
