#include "mobgen/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <set>

#include "mobgen/error.hpp"
#include "mobgen/hash.hpp"
#include "mobgen/io.hpp"

namespace mobgen {

namespace {

const char* type_name(const nlohmann::json& j) {
    return j.type_name();
}

/// Reads one JSON object, remembering which keys were consumed.
class Section {
public:
    Section(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) {
            throw ConfigError(where() + ": expected a mapping, got " + type_name(j_));
        }
    }

    template <class T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        const auto& v = j_.at(key);
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) fail(key, "a boolean", v);
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) fail(key, "an integer", v);
            if constexpr (std::is_unsigned_v<T>) {
                if (v.get<long long>() < 0) throw ConfigError(field(key) + ": must be non-negative");
            }
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) fail(key, "a number", v);
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) fail(key, "a string", v);
        } else {
            if (!v.is_array()) fail(key, "a list", v);
            for (const auto& e : v) {
                if (!e.is_number()) fail(key, "a list of numbers", v);
            }
        }
        out = v.get<T>();
    }

    Section sub(const char* key) {
        seen_.insert(key);
        static const nlohmann::json empty = nlohmann::json::object();
        return Section(j_.contains(key) ? j_.at(key) : empty, field(key));
    }

    bool has(const char* key) const { return j_.contains(key); }

    void finish() const {
        for (const auto& [k, v] : j_.items()) {
            if (!seen_.count(k)) throw ConfigError(field(k) + ": unknown field");
        }
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    [[noreturn]] void fail(const char* key, const char* expected, const nlohmann::json& v) const {
        throw ConfigError(field(key) + ": expected " + expected + ", got " + type_name(v));
    }
    std::string where() const { return path_.empty() ? "config" : path_; }

    const nlohmann::json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void require(bool ok, const std::string& field, const std::string& what) {
    if (!ok) throw ConfigError(field + ": " + what);
}

}  // namespace

void RunConfig::validate() const {
    require(version == kConfigVersion, "version", "unsupported config version " + std::to_string(version));
    try {
        city.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
    try {
        epr.validate(denoiser.traj_len);
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
    require(data.n_train >= 2, "data.n_train", "must be at least 2");
    require(data.n_holdout >= 2, "data.n_holdout", "must be at least 2");
    require(diffusion.K >= 2, "diffusion.K", "must be at least 2");
    require(diffusion.beta_min > 0.0 && diffusion.beta_min < diffusion.beta_max && diffusion.beta_max < 1.0,
            "diffusion.beta_min", "need 0 < beta_min < beta_max < 1");
    require(diffusion.sample_steps >= 1 && diffusion.sample_steps <= diffusion.K, "diffusion.sample_steps",
            "must lie in [1, K]");
    require(diffusion.spacing >= 1.0, "diffusion.spacing", "must be at least 1");
    try {
        sampling_steps(diffusion.K, diffusion.sample_steps, diffusion.spacing);
        sampling_steps(diffusion.K, generate.inversion_steps, diffusion.spacing);
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("diffusion.spacing: ") + e.what());
    }
    try {
        denoiser.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
    try {
        edm.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("edm: ") + e.what());
    }
    optimizer.validate();
    require(train.epochs >= 1, "train.epochs", "must be at least 1");
    require(train.batch_size >= 1, "train.batch_size", "must be at least 1");
    require(train.micro_batch >= 1, "train.micro_batch", "must be at least 1");
    require(train.patience >= 0, "train.patience", "must be non-negative");
    require(train.holdout_eval >= 1, "train.holdout_eval", "must be at least 1");
    require(train.loss_weighting == "none" || train.loss_weighting == "edm", "train.loss_weighting",
            "expected 'none' or 'edm'");
    require(generate.n >= 2, "generate.n", "must be at least 2");
    require(generate.inversion_steps >= 1 && generate.inversion_steps <= diffusion.K, "generate.inversion_steps",
            "must lie in [1, K]");
    require(generate.p_floor > 0.0 && generate.p_floor <= 1.0, "generate.p_floor", "must lie in (0, 1]");
    require(generate.chunk >= 1, "generate.chunk", "must be at least 1");
}

VpSchedule RunConfig::schedule() const {
    VpSchedule s = make_vp_schedule(diffusion.K, diffusion.beta_min, diffusion.beta_max);
    s.spacing = diffusion.spacing;
    return s;
}

nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json j;
    j["version"] = c.version;
    j["name"] = c.name;
    j["city"] = to_json(c.city);
    j["epr"] = {{"n_omega", c.epr.n_omega}, {"beta1", c.epr.beta1},   {"beta2", c.epr.beta2},
                {"rho", c.epr.rho},         {"gamma", c.epr.gamma},   {"home_return", c.epr.home_return}};
    j["data"] = {{"n_train", c.data.n_train}, {"n_holdout", c.data.n_holdout}, {"seed", c.data.seed}};
    j["diffusion"] = {{"K", c.diffusion.K},
                      {"beta_min", c.diffusion.beta_min},
                      {"beta_max", c.diffusion.beta_max},
                      {"sample_steps", c.diffusion.sample_steps},
                      {"spacing", c.diffusion.spacing}};
    j["denoiser"] = to_json(c.denoiser);
    j["edm"] = {{"sigma_data", c.edm.sigma_data}, {"p_mean", c.edm.p_mean}, {"p_std", c.edm.p_std}};
    j["optimizer"] = to_json(c.optimizer);
    j["train"] = {{"epochs", c.train.epochs},
                  {"batch_size", c.train.batch_size},
                  {"micro_batch", c.train.micro_batch},
                  {"patience", c.train.patience},
                  {"holdout_eval", c.train.holdout_eval},
                  {"loss_weighting", c.train.loss_weighting},
                  {"seed", c.train.seed},
                  {"init_seed", c.train.init_seed}};
    j["generate"] = {{"n", c.generate.n},
                     {"seed", c.generate.seed},
                     {"ablation", to_string(c.generate.ablation)},
                     {"inversion_steps", c.generate.inversion_steps},
                     {"p_floor", c.generate.p_floor},
                     {"chunk", c.generate.chunk}};
    return j;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig c;
    Section root(j, "");
    root.get("version", c.version);
    if (c.version != kConfigVersion) {
        throw ConfigError("version: unsupported config version " + std::to_string(c.version) + " (expected " +
                          std::to_string(kConfigVersion) + ")");
    }
    root.get("name", c.name);
    {
        auto s = root.sub("city");
        s.get("grid_side", c.city.grid_side);
        s.get("n_hotspots", c.city.n_hotspots);
        s.get("hotspot_spread", c.city.hotspot_spread);
        s.get("uniform_floor", c.city.uniform_floor);
        s.get("gravity_exponent", c.city.gravity_exponent);
        s.get("cell_extent", c.city.cell_extent);
        s.get("total_trips", c.city.total_trips);
        s.get("seed", c.city.seed);
        s.finish();
    }
    {
        auto s = root.sub("epr");
        s.get("n_omega", c.epr.n_omega);
        s.get("beta1", c.epr.beta1);
        s.get("beta2", c.epr.beta2);
        s.get("rho", c.epr.rho);
        s.get("gamma", c.epr.gamma);
        s.get("home_return", c.epr.home_return);
        s.finish();
    }
    {
        auto s = root.sub("data");
        s.get("n_train", c.data.n_train);
        s.get("n_holdout", c.data.n_holdout);
        s.get("seed", c.data.seed);
        s.finish();
    }
    {
        auto s = root.sub("diffusion");
        s.get("K", c.diffusion.K);
        s.get("beta_min", c.diffusion.beta_min);
        s.get("beta_max", c.diffusion.beta_max);
        s.get("sample_steps", c.diffusion.sample_steps);
        s.get("spacing", c.diffusion.spacing);
        s.finish();
    }
    {
        auto s = root.sub("denoiser");
        s.get("traj_len", c.denoiser.traj_len);
        s.get("channels", c.denoiser.channels);
        s.get("hidden_dim", c.denoiser.hidden_dim);
        std::vector<int> mult = c.denoiser.channel_mult;
        s.get("channel_mult", mult);
        c.denoiser.channel_mult = mult;
        s.get("blocks_per_stage", c.denoiser.blocks_per_stage);
        s.get("freq_bands", c.denoiser.freq_bands);
        s.get("emb_mult", c.denoiser.emb_mult);
        s.get("channels_per_head", c.denoiser.channels_per_head);
        s.get("cond_drop_prob", c.denoiser.cond_drop_prob);
        s.get("guidance_scale", c.denoiser.guidance_scale);
        s.finish();
    }
    {
        auto s = root.sub("edm");
        s.get("sigma_data", c.edm.sigma_data);
        s.get("p_mean", c.edm.p_mean);
        s.get("p_std", c.edm.p_std);
        s.finish();
    }
    {
        auto s = root.sub("optimizer");
        std::string kind = to_string(c.optimizer.kind);
        s.get("kind", kind);
        c.optimizer.kind = optimizer_kind_from_string(kind);
        s.get("lr", c.optimizer.lr);
        s.get("weight_decay", c.optimizer.weight_decay);
        s.get("momentum", c.optimizer.momentum);
        s.get("beta1", c.optimizer.beta1);
        s.get("beta2", c.optimizer.beta2);
        s.get("eps", c.optimizer.eps);
        s.get("grad_clip", c.optimizer.grad_clip);
        s.get("pct_start", c.optimizer.pct_start);
        s.get("div_factor", c.optimizer.div_factor);
        s.get("final_div_factor", c.optimizer.final_div_factor);
        s.finish();
    }
    {
        auto s = root.sub("train");
        s.get("epochs", c.train.epochs);
        s.get("batch_size", c.train.batch_size);
        s.get("micro_batch", c.train.micro_batch);
        s.get("patience", c.train.patience);
        s.get("holdout_eval", c.train.holdout_eval);
        s.get("loss_weighting", c.train.loss_weighting);
        s.get("seed", c.train.seed);
        s.get("init_seed", c.train.init_seed);
        s.finish();
    }
    {
        auto s = root.sub("generate");
        s.get("n", c.generate.n);
        s.get("seed", c.generate.seed);
        std::string ablation = to_string(c.generate.ablation);
        s.get("ablation", ablation);
        try {
            c.generate.ablation = ablation_from_string(ablation);
        } catch (const InvalidArgument& e) {
            throw ConfigError(std::string("generate.ablation: ") + e.what());
        }
        s.get("inversion_steps", c.generate.inversion_steps);
        s.get("p_floor", c.generate.p_floor);
        s.get("chunk", c.generate.chunk);
        s.finish();
    }
    root.finish();
    if (c.epr.home_return.empty()) c.epr.home_return = default_home_return_profile(c.denoiser.traj_len);
    c.validate();
    return c;
}

std::string config_hash(const RunConfig& cfg) {
    return sha256_hex(to_json(cfg).dump());
}

World build_world(const RunConfig& cfg) {
    cfg.validate();
    GridCity city = generate_city(cfg.city);
    FlowMatrix flows = ground_truth_flows(city, cfg.city.gravity_exponent, cfg.city.total_trips);
    const auto profile = default_move_profile(cfg.denoiser.traj_len);
    TrajectoryDataset tr = generate_training_dataset(city, flows, cfg.epr, profile, cfg.data.n_train,
                                                     derive_seed(cfg.data.seed, 1), SplitTag::train,
                                                     cfg.denoiser.traj_len);
    TrajectoryDataset ho = generate_training_dataset(city, flows, cfg.epr, profile, cfg.data.n_holdout,
                                                     derive_seed(cfg.data.seed, 2), SplitTag::holdout,
                                                     cfg.denoiser.traj_len);
    ho.set_affine(tr.affine());
    return World{std::move(city), std::move(flows), std::move(tr), std::move(ho)};
}

nlohmann::json to_json(const EpochLog& e) {
    return {{"epoch", e.epoch},
            {"train_loss", e.train_loss},
            {"holdout_loss", e.holdout_loss},
            {"lr", e.lr},
            {"seconds", e.seconds}};
}

namespace {

BatchCondition conditions_for(const std::vector<Trajectory>& trajs, const std::vector<std::size_t>& idx,
                              int grid_side, const DataAffine& affine) {
    BatchCondition c;
    for (auto i : idx) c.start.push_back(affine.to_model(loc_to_coord(grid_side, trajs[i].at(0))));
    c.is_null.assign(idx.size(), 0);
    return c;
}

TrajBatch gather(const TrajBatch& x, const std::vector<std::size_t>& idx, int T) {
    TrajBatch out(x.rows(), static_cast<Eigen::Index>(idx.size()) * T);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        out.middleCols(static_cast<Eigen::Index>(i) * T, T) = x.middleCols(static_cast<Eigen::Index>(idx[i]) * T, T);
    }
    return out;
}

BatchCondition slice(const BatchCondition& c, std::size_t lo, std::size_t n) {
    BatchCondition s;
    s.start.assign(c.start.begin() + static_cast<std::ptrdiff_t>(lo), c.start.begin() + static_cast<std::ptrdiff_t>(lo + n));
    s.is_null.assign(c.is_null.begin() + static_cast<std::ptrdiff_t>(lo),
                     c.is_null.begin() + static_cast<std::ptrdiff_t>(lo + n));
    return s;
}

Eigen::VectorXd edm_weights(const Eigen::VectorXd& sigma, double sigma_data) {
    Eigen::VectorXd w(sigma.size());
    for (Eigen::Index i = 0; i < sigma.size(); ++i) {
        const double s = sigma(i);
        w(i) = (s * s + sigma_data * sigma_data) / (s * sigma_data * s * sigma_data);
    }
    return w;
}

/// Loss and summed gradient of one batch, evaluated in fixed-order slices.
double batch_loss(const DenoiserModel& model, const TrajBatch& x0, const BatchCondition& cond,
                  const Eigen::VectorXd& sigma, const TrajBatch& noise, const Eigen::VectorXd* weights,
                  int micro_batch, std::vector<double>* grad) {
    const std::size_t b = cond.batch();
    const int T = model.config().traj_len;
    const auto denom = static_cast<double>(b);
    double total = 0.0;
    std::vector<double> part;
    if (grad) grad->assign(model.params().count(), 0.0);
    for (std::size_t lo = 0; lo < b; lo += static_cast<std::size_t>(micro_batch)) {
        const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(micro_batch), b - lo);
        const auto first = static_cast<Eigen::Index>(lo) * T;
        const auto cols = static_cast<Eigen::Index>(n) * T;
        const Eigen::VectorXd s = sigma.segment(static_cast<Eigen::Index>(lo), static_cast<Eigen::Index>(n));
        Eigen::VectorXd w;
        if (weights) w = weights->segment(static_cast<Eigen::Index>(lo), static_cast<Eigen::Index>(n));
        total += model.loss(x0.middleCols(first, cols), slice(cond, lo, n), s, noise.middleCols(first, cols),
                            grad ? &part : nullptr, weights ? &w : nullptr, denom);
        if (grad) {
            for (std::size_t i = 0; i < part.size(); ++i) (*grad)[i] += part[i];
        }
    }
    return total;
}

}  // namespace

double evaluation_loss(const DenoiserModel& model, const TrajBatch& x0, const BatchCondition& cond,
                       std::uint64_t seed, int micro_batch) {
    Rng rng = make_rng(seed, 0);
    const Eigen::VectorXd sigma = sample_edm_sigmas(cond.batch(), rng, model.edm());
    const TrajBatch noise = standard_gaussian(x0.rows(), x0.cols(), rng);
    return batch_loss(model, x0, cond, sigma, noise, nullptr, micro_batch, nullptr);
}

DenoiserModel model_from_checkpoint(const Checkpoint& ck, Precision precision) {
    return DenoiserModel(ck.config, ck.params, ck.edm, precision);
}

std::vector<double> checkpoint_moving_probability(const Checkpoint& ck) {
    if (!ck.manifest.contains("moving_probability")) {
        throw InvalidArgument("checkpoint manifest lacks the training moving probability");
    }
    return ck.manifest.at("moving_probability").get<std::vector<double>>();
}

TrainResult train(const RunConfig& cfg, const TrajectoryDataset& train_ds, const TrajectoryDataset& holdout_ds,
                  const EpochCallback& on_epoch) {
    cfg.validate();
    const int T = cfg.denoiser.traj_len;
    if (train_ds.traj_len() != T || holdout_ds.traj_len() != T) {
        throw InvalidArgument("train: dataset trajectory length differs from denoiser.traj_len");
    }
    if (train_ds.grid_side() != holdout_ds.grid_side()) {
        throw InvalidArgument("train: training and holdout datasets belong to different cities");
    }
    const auto& affine = train_ds.affine();
    const int G = train_ds.grid_side();
    const TrajBatch x_train = to_batch(train_ds.trajectories(), G, affine);

    std::vector<std::size_t> eval_idx(std::min(cfg.train.holdout_eval, holdout_ds.size()));
    std::iota(eval_idx.begin(), eval_idx.end(), 0);
    const TrajBatch x_eval = gather(to_batch(holdout_ds.trajectories(), G, affine), eval_idx, T);
    const BatchCondition c_eval = conditions_for(holdout_ds.trajectories(), eval_idx, G, affine);
    const std::uint64_t eval_seed = derive_seed(cfg.train.seed, 0xE7A1);

    DenoiserModel model(cfg.denoiser, init_params(cfg.denoiser, cfg.train.init_seed), cfg.edm);
    const std::size_t n = train_ds.size();
    const auto bs = static_cast<std::size_t>(cfg.train.batch_size);
    const std::size_t batches = (n + bs - 1) / bs;
    Optimizer opt(cfg.optimizer, model.params().count(), static_cast<long>(batches) * cfg.train.epochs);

    TrainResult result;
    result.initial_holdout_loss = evaluation_loss(model, x_eval, c_eval, eval_seed, cfg.train.micro_batch);
    ParamStore best = model.params();
    double best_loss = result.initial_holdout_loss;
    int since_best = 0;
    std::vector<std::size_t> order(n);
    std::vector<double> grad;

    for (int epoch = 1; epoch <= cfg.train.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::iota(order.begin(), order.end(), 0);
        Rng rng = make_rng(cfg.train.seed, static_cast<std::uint64_t>(epoch));
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        for (std::size_t bi = 0; bi < batches; ++bi) {
            const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(bi * bs),
                                               order.begin() + static_cast<std::ptrdiff_t>(std::min(n, (bi + 1) * bs)));
            const TrajBatch x0 = gather(x_train, idx, T);
            BatchCondition cond = conditions_for(train_ds.trajectories(), idx, G, affine);
            for (auto& f : cond.is_null) f = uniform01(rng) < cfg.denoiser.cond_drop_prob ? 1 : 0;
            const Eigen::VectorXd sigma = sample_edm_sigmas(idx.size(), rng, cfg.edm);
            const TrajBatch noise = standard_gaussian(x0.rows(), x0.cols(), rng);
            Eigen::VectorXd w;
            if (cfg.train.loss_weighting == "edm") w = edm_weights(sigma, cfg.edm.sigma_data);
            const double loss = batch_loss(model, x0, cond, sigma, noise, w.size() ? &w : nullptr,
                                           cfg.train.micro_batch, &grad);
            if (!std::isfinite(loss)) {
                throw NumericError("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(bi));
            }
            loss_sum += loss;
            opt.step(model.mutable_values(), grad);
            auto& values = model.mutable_values();
            for (auto& v : values) v = static_cast<double>(static_cast<float>(v));
            model.sync();
        }
        EpochLog log;
        log.epoch = epoch;
        log.train_loss = loss_sum / static_cast<double>(batches);
        log.holdout_loss = evaluation_loss(model, x_eval, c_eval, eval_seed, cfg.train.micro_batch);
        log.lr = opt.current_lr();
        log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (!std::isfinite(log.holdout_loss)) {
            throw NumericError("training diverged: non-finite holdout loss at epoch " + std::to_string(epoch));
        }
        result.log.push_back(log);
        if (on_epoch) on_epoch(log);
        if (log.holdout_loss < best_loss) {
            best_loss = log.holdout_loss;
            best = model.params();
            result.best_epoch = epoch;
            since_best = 0;
        } else if (cfg.train.patience > 0 && ++since_best >= cfg.train.patience) {
            result.early_stopped = true;
            break;
        }
    }

    auto& ck = result.checkpoint;
    ck.config = cfg.denoiser;
    ck.params = std::move(best);
    ck.schedule = cfg.schedule();
    ck.affine = affine;
    ck.edm = cfg.edm;
    nlohmann::json log_json = nlohmann::json::array();
    for (const auto& e : result.log) {
        auto j = to_json(e);
        j.erase("seconds");
        log_json.push_back(j);
    }
    ck.manifest = {{"config_hash", config_hash(cfg)},
                   {"train_data_sha256", sha256_hex(serialize_dataset(train_ds))},
                   {"holdout_data_sha256", sha256_hex(serialize_dataset(holdout_ds))},
                   {"grid_side", G},
                   {"cell_extent", train_ds.cell_extent()},
                   {"moving_probability", moving_probability(train_ds)},
                   {"sample_steps", cfg.diffusion.sample_steps},
                   {"optimizer", to_json(cfg.optimizer)},
                   {"train", to_json(cfg)["train"]},
                   {"initial_holdout_loss", result.initial_holdout_loss},
                   {"best_epoch", result.best_epoch},
                   {"early_stopped", result.early_stopped},
                   {"epochs", log_json}};
    return result;
}

TrajBatch sample_from_prior(const DenoiserModel& model, const VpSchedule& sched, const TrajBatch& z,
                            const BatchCondition& cond, int traj_len, int n_steps, std::size_t chunk) {
    const DenoiserEps eps(model);
    return map_chunks(z, cond, traj_len, chunk, [&](const TrajBatch& zs, const BatchCondition& c) {
        return ddim_sample(eps, zs, sched, c, n_steps);
    });
}

std::vector<GeneratedSet> generate(const Checkpoint& ck, const GridCity& city, const FlowMatrix& flows,
                                   const EprParams& epr, const GenerationRequest& req) {
    if (req.n == 0) {
        throw InvalidArgument("generate: n must be positive");
    }
    if (req.ablations.empty()) {
        throw InvalidArgument("generate: no ablation requested");
    }
    if (city.grid_side() != ck.manifest.value("grid_side", city.grid_side())) {
        throw InvalidArgument("generate: checkpoint was trained on a different grid");
    }
    DenoiserModel model = model_from_checkpoint(ck);
    if (req.guidance_scale >= 0.0) model.set_guidance_scale(req.guidance_scale);
    const DenoiserEps eps(model);
    const int T = ck.config.traj_len;
    const auto p_move = checkpoint_moving_probability(ck);
    bool need_inversion = false;
    for (auto a : req.ablations) need_inversion = need_inversion || a != Ablation::no_prior;

    NoisePriorSettings settings;
    settings.n_steps = req.inversion_steps;
    settings.p_floor = req.p_floor;
    settings.chunk = req.chunk;
    const FlowSampler sampler(flows, city);
    const auto src = sample_prior_sources(city, sampler, epr, p_move, &eps, ck.schedule, ck.affine, req.n,
                                          req.seed, need_inversion, settings);
    const BatchCondition cond = start_conditions(src.x_f, city.grid_side(), ck.affine);

    std::vector<GeneratedSet> out;
    for (auto a : req.ablations) {
        NoisePrior prior = assemble_noise_prior(src, a, p_move, T, settings);
        const TrajBatch x = sample_from_prior(model, ck.schedule, prior.z, cond, T, req.sample_steps, req.chunk);
        auto trajs = from_batch(x, T, city.grid_side(), ck.affine);
        TrajectoryDataset ds(city.grid_side(), city.cell_extent(), T, SplitTag::generated, std::move(trajs),
                             ck.affine);
        prior.provenance["flow_hash"] = sha256_hex(serialize_flows_csv(flows));
        prior.provenance["schedule_hash"] = ck.schedule.hash();
        prior.provenance["sample_steps"] = req.sample_steps;
        prior.provenance["guidance_scale"] = model.guidance_scale();
        prior.provenance["condition"] = "home of each collaborative sequence";
        out.push_back({a, std::move(ds), prior.provenance});
    }
    return out;
}

TrajectoryDataset generate(const Checkpoint& ck, const GridCity& city, const FlowMatrix& flows, const EprParams& epr,
                           std::size_t n, Ablation ablation, std::uint64_t seed) {
    GenerationRequest req;
    req.n = n;
    req.seed = seed;
    req.ablations = {ablation};
    req.sample_steps = ck.manifest.value("sample_steps", 100);
    auto sets = generate(ck, city, flows, epr, req);
    return std::move(sets.front().data);
}

}  // namespace mobgen
