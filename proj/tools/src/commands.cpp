#include "mobgen_cli/commands.hpp"

#include <iostream>

#include "mobgen/analysis.hpp"
#include "mobgen/city.hpp"
#include "mobgen/error.hpp"
#include "mobgen/hash.hpp"
#include "mobgen/io.hpp"
#include "mobgen/metrics.hpp"
#include "mobgen/parallel.hpp"
#include "mobgen/pipeline.hpp"
#include "mobgen/privacy.hpp"
#include "mobgen_cli/config_loader.hpp"
#include "mobgen_cli/manifest.hpp"
#include "mobgen_cli/svg.hpp"
#include "mobgen_cli/utility_probe.hpp"

namespace mobgen::cli {

namespace {

void require_file(const fs::path& p, const std::string& what) {
    if (!fs::exists(p)) throw IoError(what + " not found: " + p.string());
    if (!fs::is_regular_file(p)) throw IoError(what + " is not a regular file: " + p.string());
}

void prepare_out(const fs::path& out) {
    if (out.empty()) throw InvalidArgument("--out must name a directory");
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec || !fs::is_directory(out)) throw IoError("cannot create output directory " + out.string());
}

void add_with_sidecar(RunManifest& m, const fs::path& p) {
    m.add_output(p);
    if (fs::exists(sidecar_path(p))) m.add_output(sidecar_path(p));
}

void add_input_with_sidecar(RunManifest& m, const fs::path& p) {
    m.add_input(p);
    if (fs::exists(sidecar_path(p))) m.add_input(sidecar_path(p));
}

void write_svg(RunManifest& m, const fs::path& p, const std::string& svg) {
    write_text_file(p, svg);
    m.add_output(p);
}

void finish(RunManifest& m, const fs::path& out, const Stopwatch& clock) {
    m.timings["total"] = clock.seconds();
    m.threads = thread_count();
    append_manifest(out, m);
}

RunManifest start(const std::string& command, const fs::path& config, const RunConfig* cfg) {
    RunManifest m;
    m.command = command;
    if (cfg) {
        m.config_hash = config_hash(*cfg);
        m.add_input(config);
    }
    return m;
}

std::vector<double> epoch_numbers(const std::vector<EpochLog>& log) {
    std::vector<double> v;
    for (const auto& e : log) v.push_back(e.epoch);
    return v;
}

}  // namespace

void cmd_synth_city(const SynthCityOptions& o) {
    Stopwatch clock;
    const RunConfig cfg = load_run_config(o.config);
    prepare_out(o.out);
    RunManifest m = start("synth-city", o.config, &cfg);
    m.seeds = {{"city", cfg.city.seed}, {"data", cfg.data.seed}};

    const World w = build_world(cfg);
    const fs::path city = o.out / kCityFile;
    const fs::path flows = o.out / kFlowsFile;
    const fs::path train = o.out / kTrainFile;
    const fs::path holdout = o.out / kHoldoutFile;
    write_city(city, w.city, cfg.city);
    write_flows(flows, w.flows, cfg.city.seed);
    write_dataset(train, w.train, cfg.data.seed);
    write_dataset(holdout, w.holdout, cfg.data.seed);
    add_with_sidecar(m, city);
    add_with_sidecar(m, flows);
    add_with_sidecar(m, train);
    add_with_sidecar(m, holdout);
    if (o.svg) write_svg(m, o.out / "flows.svg", svg_flow_heatmap(w.flows, "ground-truth flows"));

    m.results = {{"n_cells", w.city.size()},
                 {"n_train", w.train.size()},
                 {"n_holdout", w.holdout.size()},
                 {"total_flow", w.flows.total()}};
    finish(m, o.out, clock);
    std::cout << "synth-city: " << w.train.size() << " train, " << w.holdout.size() << " holdout trajectories on a "
              << w.city.grid_side() << "x" << w.city.grid_side() << " grid -> " << o.out.string() << '\n';
}

void cmd_train(const TrainOptions& o) {
    Stopwatch clock;
    const RunConfig cfg = load_run_config(o.config);
    const fs::path train_path = o.data / kTrainFile;
    const fs::path holdout_path = o.data / kHoldoutFile;
    require_file(train_path, "training set");
    require_file(holdout_path, "holdout set");
    prepare_out(o.out);
    RunManifest m = start("train", o.config, &cfg);
    add_input_with_sidecar(m, train_path);
    add_input_with_sidecar(m, holdout_path);
    m.seeds = {{"train", cfg.train.seed}, {"init", cfg.train.init_seed}};

    const TrajectoryDataset train_ds = read_dataset(train_path);
    const TrajectoryDataset holdout_ds = read_dataset(holdout_path);
    const TrainResult r = train(cfg, train_ds, holdout_ds, [](const EpochLog& e) {
        std::cerr << "epoch " << e.epoch << " train " << format_double(e.train_loss) << " holdout "
                  << format_double(e.holdout_loss) << " lr " << format_double(e.lr) << '\n';
    });

    const fs::path ck = o.out / kCheckpointFile;
    save_checkpoint(ck, r.checkpoint);
    m.add_output(ck);
    std::string csv = "epoch,train_loss,holdout_loss,lr\n";
    for (const auto& e : r.log) {
        csv += std::to_string(e.epoch) + ',' + format_double(e.train_loss) + ',' + format_double(e.holdout_loss) + ',' +
               format_double(e.lr) + '\n';
    }
    const fs::path loss = o.out / kLossFile;
    write_text_file(loss, csv);
    m.add_output(loss);
    if (o.svg) {
        std::vector<double> tr, ho;
        for (const auto& e : r.log) {
            tr.push_back(e.train_loss);
            ho.push_back(e.holdout_loss);
        }
        const auto x = epoch_numbers(r.log);
        write_svg(m, o.out / "loss.svg",
                  svg_line_chart({{"holdout", x, ho}}, "holdout loss", "epoch", "loss"));
        write_svg(m, o.out / "train_loss.svg",
                  svg_line_chart({{"train", x, tr}}, "training loss", "epoch", "loss"));
    }
    double train_seconds = 0.0;
    for (const auto& e : r.log) train_seconds += e.seconds;
    m.timings["training"] = train_seconds;
    m.results = {{"best_epoch", r.best_epoch},
                 {"epochs_run", r.log.size()},
                 {"early_stopped", r.early_stopped},
                 {"initial_holdout_loss", r.initial_holdout_loss},
                 {"final_holdout_loss", r.log.empty() ? 0.0 : r.log.back().holdout_loss}};
    finish(m, o.out, clock);
    std::cout << "train: best epoch " << r.best_epoch << " of " << r.log.size() << " -> " << ck.string() << '\n';
}

void cmd_generate(const GenerateOptions& o) {
    Stopwatch clock;
    const RunConfig cfg = load_run_config(o.config);
    const fs::path city_path = o.data / kCityFile;
    const fs::path flows_path = o.data / kFlowsFile;
    require_file(city_path, "city");
    require_file(flows_path, "flow matrix");
    require_file(o.checkpoint, "checkpoint");

    GenerationRequest req;
    req.n = o.n.value_or(cfg.generate.n);
    req.seed = o.seed.value_or(cfg.generate.seed);
    if (o.ablation == "all") {
        req.ablations = {Ablation::full, Ablation::no_prior, Ablation::no_fusion};
    } else {
        req.ablations = {ablation_from_string(o.ablation)};
    }
    req.sample_steps = cfg.diffusion.sample_steps;
    req.inversion_steps = cfg.generate.inversion_steps;
    req.p_floor = cfg.generate.p_floor;
    req.chunk = cfg.generate.chunk;
    if (req.n == 0) throw InvalidArgument("--n must be positive");
    prepare_out(o.out);

    RunManifest m = start("generate", o.config, &cfg);
    add_input_with_sidecar(m, city_path);
    add_input_with_sidecar(m, flows_path);
    m.add_input(o.checkpoint);
    m.seeds = {{"generate", req.seed}};

    const GridCity city = read_city(city_path);
    const FlowMatrix flows = read_flows(flows_path);
    const Checkpoint ck = load_checkpoint(o.checkpoint);
    const auto sets = generate(ck, city, flows, cfg.epr, req);

    nlohmann::json results = nlohmann::json::object();
    for (const auto& s : sets) {
        const fs::path p = o.out / ("gen_" + to_string(s.ablation) + ".csv");
        write_dataset(p, s.data, req.seed);
        add_with_sidecar(m, p);
        results[to_string(s.ablation)] = {{"n", s.data.size()}, {"provenance", s.provenance}};
        if (o.svg) {
            write_svg(m, o.out / ("flows_" + to_string(s.ablation) + ".svg"),
                      svg_flow_heatmap(flows_from_dataset(s.data), "generated flows (" + to_string(s.ablation) + ")"));
        }
    }
    m.results = results;
    finish(m, o.out, clock);
    std::cout << "generate: " << req.n << " trajectories x " << sets.size() << " ablation(s) -> " << o.out.string()
              << '\n';
}

void cmd_evaluate(const EvaluateOptions& o) {
    Stopwatch clock;
    require_file(o.real, "real dataset");
    require_file(o.gen, "generated dataset");
    MapeAveraging averaging;
    if (o.mape_averaging == "per_row") {
        averaging = MapeAveraging::per_row;
    } else if (o.mape_averaging == "global") {
        averaging = MapeAveraging::global;
    } else {
        throw InvalidArgument("--mape-averaging must be per_row or global, got '" + o.mape_averaging + "'");
    }
    prepare_out(o.out);
    RunManifest m = start("evaluate", {}, nullptr);
    add_input_with_sidecar(m, o.real);
    add_input_with_sidecar(m, o.gen);

    const TrajectoryDataset real = read_dataset(o.real);
    const TrajectoryDataset gen = read_dataset(o.gen);
    const MetricReport report = evaluate_all(real, gen, averaging);
    const fs::path metrics = o.out / "metrics.json";
    write_text_file(metrics, to_json(report).dump(2) + "\n");
    m.add_output(metrics);
    const TrajectoryStats rs = trajectory_stats(real);
    const TrajectoryStats gs = trajectory_stats(gen);
    const fs::path dist = o.out / "distributions.csv";
    write_text_file(dist, distribution_csv(rs, gs));
    m.add_output(dist);
    const fs::path gen_flows = o.out / "gen_flows.csv";
    write_text_file(gen_flows, serialize_flows_csv(flows_from_dataset(gen)));
    m.add_output(gen_flows);
    if (o.svg) {
        write_svg(m, o.out / "ecdf_radius.svg",
                  svg_ecdf({{"real", rs.radius}, {"generated", gs.radius}}, "radius of gyration", "km"));
        write_svg(m, o.out / "ecdf_distance.svg",
                  svg_ecdf({{"real", rs.distance}, {"generated", gs.distance}}, "travel distance", "km"));
        write_svg(m, o.out / "ecdf_duration.svg",
                  svg_ecdf({{"real", rs.duration}, {"generated", gs.duration}}, "stay duration", "slots"));
        write_svg(m, o.out / "ecdf_dailyloc.svg",
                  svg_ecdf({{"real", rs.dailyloc}, {"generated", gs.dailyloc}}, "daily locations", "count"));
        write_svg(m, o.out / "flows_generated.svg", svg_flow_heatmap(flows_from_dataset(gen), "generated flows"));
    }
    m.results = to_json(report);
    finish(m, o.out, clock);
    std::cout << "evaluate: cpc " << format_double(report.cpc) << " ks_radius " << format_double(report.ks_radius)
              << " -> " << metrics.string() << '\n';
}

void cmd_privacy(const PrivacyOptions& o) {
    Stopwatch clock;
    require_file(o.train, "training set");
    require_file(o.holdout, "holdout set");
    require_file(o.gen, "generated dataset");
    MiaProtocol protocol;
    protocol.n_members = o.n_members;
    protocol.n_nonmembers = o.n_nonmembers;
    protocol.seed = o.seed;
    protocol.validate();
    prepare_out(o.out);
    RunManifest m = start("privacy", {}, nullptr);
    add_input_with_sidecar(m, o.train);
    add_input_with_sidecar(m, o.holdout);
    add_input_with_sidecar(m, o.gen);
    m.seeds = {{"privacy", o.seed}};

    const TrajectoryDataset train_ds = read_dataset(o.train);
    const TrajectoryDataset holdout_ds = read_dataset(o.holdout);
    const TrajectoryDataset gen = read_dataset(o.gen);

    Stopwatch uq_clock;
    const UniquenessResult uq = uniqueness_ecdf(gen, train_ds, {1, 3, 5}, o.n_probe, o.seed);
    m.timings["uniqueness"] = uq_clock.seconds();
    const fs::path uq_csv = o.out / "uniqueness.csv";
    const fs::path uq_json = o.out / "uniqueness.json";
    write_text_file(uq_csv, uniqueness_csv(uq));
    write_text_file(uq_json, to_json(uq).dump(2) + "\n");
    m.add_output(uq_csv);
    m.add_output(uq_json);

    Stopwatch mia_clock;
    const MiaResult mia = run_mia(protocol, train_ds, holdout_ds, gen);
    m.timings["mia"] = mia_clock.seconds();
    const fs::path mia_json = o.out / "mia.json";
    write_text_file(mia_json, to_json(mia).dump(2) + "\n");
    m.add_output(mia_json);
    if (o.svg) {
        std::vector<std::pair<std::string, std::vector<double>>> samples;
        for (std::size_t k = 0; k < uq.ks.size(); ++k) samples.emplace_back("top-" + std::to_string(uq.ks[k]), uq.values[k]);
        write_svg(m, o.out / "uniqueness.svg", svg_ecdf(samples, "uniqueness", "overlap ratio"));
    }
    m.results = {{"top1_fraction_below_0.4", uq.fraction_below(0, 0.4)},
                 {"mia_max_success", mia.max_success()},
                 {"mia_min_success", mia.min_success()}};
    finish(m, o.out, clock);
    std::cout << "privacy: top-1 below 0.4 " << format_double(uq.fraction_below(0, 0.4)) << ", MIA max success "
              << format_double(mia.max_success()) << " -> " << o.out.string() << '\n';
}

void cmd_analyze(const AnalyzeOptions& o) {
    Stopwatch clock;
    require_file(o.checkpoint, "checkpoint");
    require_file(o.dataset, "dataset");
    if (o.steps <= 0) throw InvalidArgument("--steps must be positive");
    prepare_out(o.out);
    RunManifest m = start("analyze", {}, nullptr);
    m.add_input(o.checkpoint);
    add_input_with_sidecar(m, o.dataset);
    m.seeds = {{"shuffle", o.seed}};

    const Checkpoint ck = load_checkpoint(o.checkpoint);
    TrajectoryDataset ds = read_dataset(o.dataset);
    if (o.max_trajectories > 0 && ds.size() > o.max_trajectories) {
        std::vector<Trajectory> head(ds.trajectories().begin(),
                                     ds.trajectories().begin() + static_cast<std::ptrdiff_t>(o.max_trajectories));
        TrajectoryDataset cut(ds.grid_side(), ds.cell_extent(), ds.traj_len(), ds.split(), std::move(head));
        cut.set_affine(ds.affine());
        ds = std::move(cut);
    }
    if (ds.affine() != ck.affine) throw InvalidArgument("dataset affine differs from the checkpoint's");
    const DenoiserModel model = model_from_checkpoint(ck);
    const DenoiserEps eps(model);
    const NoiseAnalysis a = analyze_noise(eps, ds, ck.schedule, o.steps, 16, o.seed);

    const fs::path json = o.out / "noise_analysis.json";
    write_text_file(json, to_json(a).dump(2) + "\n");
    m.add_output(json);
    const fs::path scatter = o.out / "move_scatter.csv";
    write_text_file(scatter, move_scatter_csv(a.moves));
    m.add_output(scatter);
    const fs::path vectors = o.out / "noise_vectors.csv";
    export_noise_vectors(vectors, a.z, ds);
    m.add_output(vectors);
    m.results = {{"r2_direction", a.direction.r_squared},
                 {"r2_distance", a.distance.r_squared},
                 {"r2_direction_shuffled", a.direction_shuffled.r_squared},
                 {"rhythm_correlation", a.rhythm.correlation ? nlohmann::json(*a.rhythm.correlation) : nlohmann::json(nullptr)}};
    finish(m, o.out, clock);
    std::cout << "analyze: R2 direction " << format_double(a.direction.r_squared) << ", distance "
              << format_double(a.distance.r_squared) << " -> " << json.string() << '\n';
}

void cmd_utility_probe(const UtilityProbeOptions& o) {
    Stopwatch clock;
    require_file(o.real, "real dataset");
    require_file(o.gen, "generated dataset");
    require_file(o.test, "test dataset");
    if (o.mix.empty()) throw InvalidArgument("--mix needs at least one value");
    prepare_out(o.out);
    RunManifest m = start("utility-probe", {}, nullptr);
    add_input_with_sidecar(m, o.real);
    add_input_with_sidecar(m, o.gen);
    add_input_with_sidecar(m, o.test);

    const TrajectoryDataset real = read_dataset(o.real);
    const TrajectoryDataset gen = read_dataset(o.gen);
    const TrajectoryDataset test = read_dataset(o.test);
    nlohmann::json rows = nlohmann::json::array();
    for (double mix : o.mix) {
        const ProbeResult r = utility_probe(real, gen, test, mix);
        rows.push_back(to_json(r));
        std::cout << "utility-probe: mix " << format_double(mix) << " accuracy " << format_double(r.accuracy)
                  << " move accuracy " << format_double(r.move_accuracy) << '\n';
    }
    const fs::path out = o.out / "utility.json";
    write_text_file(out, nlohmann::json{{"predictor", "first-order Markov"}, {"results", rows}}.dump(2) + "\n");
    m.add_output(out);
    m.results = rows;
    finish(m, o.out, clock);
}

}  // namespace mobgen::cli
