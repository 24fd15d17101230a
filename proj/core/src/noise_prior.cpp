#include "mobgen/noise_prior.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "mobgen/error.hpp"
#include "mobgen/hash.hpp"
#include "mobgen/io.hpp"

namespace mobgen {

std::vector<double> moving_probability(const TrajectoryDataset& ds) {
    const auto T = static_cast<std::size_t>(ds.traj_len());
    std::vector<double> p(T, 0.0);
    for (const auto& tr : ds.trajectories()) {
        for (std::size_t t = 0; t + 1 < T; ++t) {
            if (tr.locs[t] != tr.locs[t + 1]) p[t] += 1.0;
        }
    }
    for (auto& v : p) v /= static_cast<double>(ds.size());
    return p;
}

std::vector<double> rhythm_scale(std::span<const double> profile, double p_floor) {
    if (profile.empty()) {
        throw InvalidArgument("rhythm_scale: empty profile");
    }
    if (!(p_floor > 0.0)) {
        throw InvalidArgument("rhythm_scale: p_floor must be positive");
    }
    std::vector<double> r(profile.size());
    double mean = 0.0;
    for (std::size_t t = 0; t < profile.size(); ++t) {
        if (!(profile[t] >= 0.0 && profile[t] <= 1.0)) {
            throw InvalidArgument("rhythm_scale: profile entries must lie in [0, 1]");
        }
        r[t] = std::max(profile[t], p_floor);
        mean += r[t];
    }
    mean /= static_cast<double>(r.size());
    for (auto& v : r) v /= mean;
    return r;
}

BatchCondition start_conditions(const std::vector<Trajectory>& trajs, int grid_side, const DataAffine& affine) {
    BatchCondition c;
    c.start.reserve(trajs.size());
    for (const auto& t : trajs) c.start.push_back(affine.to_model(loc_to_coord(grid_side, t.at(0))));
    c.is_null.assign(trajs.size(), 0);
    return c;
}

TrajBatch invert_transitions_to_noise(const EpsModel& model, const std::vector<Trajectory>& x_f, int grid_side,
                                      const DataAffine& affine, const VpSchedule& sched, int n_steps,
                                      std::size_t chunk) {
    const TrajBatch x = to_batch(x_f, grid_side, affine);
    const auto T = static_cast<int>(x_f.front().length());
    return map_chunks(x, start_conditions(x_f, grid_side, affine), T, chunk,
                      [&](const TrajBatch& xs, const BatchCondition& c) {
                          return inverse_ddim(model, xs, sched, c, n_steps);
                      });
}

TrajBatch standard_gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    TrajBatch z(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) z(i, j) = standard_normal(rng);
    }
    return z;
}

TrajBatch fuse_noise(const TrajBatch& z_f, Rng& rng) {
    return z_f + standard_gaussian(z_f.rows(), z_f.cols(), rng);
}

TrajBatch rhythmic_batchnorm(const TrajBatch& z_raw, int traj_len, std::span<const double> profile, double p_floor) {
    if (traj_len <= 0 || z_raw.cols() % traj_len != 0) {
        throw InvalidArgument("rhythmic_batchnorm: columns are not a multiple of the trajectory length");
    }
    if (profile.size() != static_cast<std::size_t>(traj_len)) {
        throw InvalidArgument("rhythmic_batchnorm: profile length differs from trajectory length");
    }
    const auto B = z_raw.cols() / traj_len;
    if (B < 2) {
        throw InvalidArgument("rhythmic_batchnorm: batch size must be at least 2");
    }
    const auto r = rhythm_scale(profile, p_floor);
    TrajBatch out(z_raw.rows(), z_raw.cols());
    for (int t = 0; t < traj_len; ++t) {
        for (Eigen::Index c = 0; c < z_raw.rows(); ++c) {
            double mean = 0.0;
            for (Eigen::Index b = 0; b < B; ++b) mean += z_raw(c, b * traj_len + t);
            mean /= static_cast<double>(B);
            double var = 0.0;
            for (Eigen::Index b = 0; b < B; ++b) {
                const double d = z_raw(c, b * traj_len + t) - mean;
                var += d * d;
            }
            const double sd = std::sqrt(var / static_cast<double>(B));
            if (!(sd > 0.0)) {
                throw NumericError("rhythmic_batchnorm: zero batch deviation at slot " + std::to_string(t) +
                                   ", channel " + std::to_string(c));
            }
            const double f = r[static_cast<std::size_t>(t)] / sd;
            for (Eigen::Index b = 0; b < B; ++b) {
                out(c, b * traj_len + t) = (z_raw(c, b * traj_len + t) - mean) * f;
            }
        }
    }
    return out;
}

std::string to_string(Ablation a) {
    switch (a) {
        case Ablation::full:
            return "full";
        case Ablation::no_prior:
            return "no_prior";
        case Ablation::no_fusion:
            return "no_fusion";
    }
    return "full";
}

Ablation ablation_from_string(const std::string& s) {
    if (s == "full") return Ablation::full;
    if (s == "no_prior") return Ablation::no_prior;
    if (s == "no_fusion") return Ablation::no_fusion;
    throw InvalidArgument("ablation: expected full, no_prior or no_fusion, got '" + s + "'");
}

std::string profile_hash(std::span<const double> profile) {
    std::string s;
    for (double v : profile) s += format_double(v) + ",";
    return sha256_hex(s);
}

PriorSources sample_prior_sources(const GridCity& city, const FlowSampler& flows, const EprParams& epr,
                                  std::span<const double> move_profile, const EpsModel* model,
                                  const VpSchedule& sched, const DataAffine& affine, std::size_t batch,
                                  std::uint64_t seed, bool invert, const NoisePriorSettings& settings) {
    if (batch == 0) {
        throw InvalidArgument("sample_prior_sources: batch must be positive");
    }
    PriorSources src;
    src.seed = seed;
    src.x_f = sample_transition_sequences(city, flows, epr, move_profile, batch, derive_seed(seed, 1),
                                          static_cast<int>(move_profile.size()));
    if (invert) {
        if (model == nullptr) {
            throw InvalidArgument("sample_prior_sources: inversion needs a model");
        }
        src.z_f = invert_transitions_to_noise(*model, src.x_f, city.grid_side(), affine, sched, settings.n_steps,
                                              settings.chunk);
    }
    return src;
}

NoisePrior assemble_noise_prior(const PriorSources& src, Ablation ablation, std::span<const double> rhythm_profile,
                                int traj_len, const NoisePriorSettings& settings) {
    NoisePrior prior;
    prior.traj_len = traj_len;
    prior.ablation = ablation;
    const auto cols = static_cast<Eigen::Index>(src.x_f.size()) * traj_len;
    Rng iid = make_rng(src.seed, 2);
    if (ablation == Ablation::no_prior) {
        prior.z = standard_gaussian(2, cols, iid);
    } else {
        if (src.z_f.cols() != cols) {
            throw InvalidArgument("assemble_noise_prior: ablation needs the inverted noise");
        }
        const TrajBatch raw = ablation == Ablation::full ? fuse_noise(src.z_f, iid) : src.z_f;
        prior.z = rhythmic_batchnorm(raw, traj_len, rhythm_profile, settings.p_floor);
    }
    prior.provenance = {{"seed", src.seed},
                        {"epr_stream", derive_seed(src.seed, 1)},
                        {"iid_stream", derive_seed(src.seed, 2)},
                        {"ablation", to_string(ablation)},
                        {"batch", src.x_f.size()},
                        {"inversion_steps", settings.n_steps},
                        {"p_floor", settings.p_floor},
                        {"rhythm_profile_hash", profile_hash(rhythm_profile)}};
    return prior;
}

NoisePrior build_noise_prior(const GridCity& city, const FlowMatrix& flows, const EprParams& epr,
                             std::span<const double> move_profile, std::span<const double> rhythm_profile,
                             const EpsModel& model, const VpSchedule& sched, const DataAffine& affine,
                             std::size_t batch, std::uint64_t seed, Ablation ablation,
                             const NoisePriorSettings& settings) {
    const FlowSampler sampler(flows, city);
    const auto src = sample_prior_sources(city, sampler, epr, move_profile, &model, sched, affine, batch, seed,
                                          ablation != Ablation::no_prior, settings);
    auto prior = assemble_noise_prior(src, ablation, rhythm_profile, static_cast<int>(move_profile.size()), settings);
    prior.provenance["flow_hash"] = sha256_hex(serialize_flows_csv(flows));
    prior.provenance["move_profile_hash"] = profile_hash(move_profile);
    prior.provenance["schedule_hash"] = sched.hash();
    return prior;
}

namespace {

constexpr char kPriorMagic[8] = {'M', 'O', 'B', 'G', 'E', 'N', 'N', 'P'};

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64(const std::string& in, std::size_t pos) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    return v;
}

}  // namespace

void write_noise_prior(const std::filesystem::path& path, const NoisePrior& prior) {
    std::string out(kPriorMagic, sizeof(kPriorMagic));
    const std::uint32_t version = 1;
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((version >> (8 * i)) & 0xFF));
    put_u64(out, prior.batch());
    put_u64(out, static_cast<std::uint64_t>(prior.traj_len));
    for (Eigen::Index j = 0; j < prior.z.cols(); ++j) {
        for (Eigen::Index i = 0; i < prior.z.rows(); ++i) put_u64(out, std::bit_cast<std::uint64_t>(prior.z(i, j)));
    }
    std::optional<std::uint64_t> seed;
    if (prior.provenance.contains("seed")) seed = prior.provenance["seed"].get<std::uint64_t>();
    write_with_sidecar(path, out, seed, "noise_prior",
                       {{"ablation", to_string(prior.ablation)}, {"provenance", prior.provenance}});
}

NoisePrior read_noise_prior(const std::filesystem::path& path) {
    const std::string in = read_verified(path);
    constexpr std::size_t head = sizeof(kPriorMagic) + 4 + 16;
    if (in.size() < head || std::memcmp(in.data(), kPriorMagic, sizeof(kPriorMagic)) != 0) {
        throw IoError("noise prior '" + path.string() + "': bad magic");
    }
    NoisePrior p;
    const auto batch = get_u64(in, sizeof(kPriorMagic) + 4);
    p.traj_len = static_cast<int>(get_u64(in, sizeof(kPriorMagic) + 12));
    const auto cols = static_cast<Eigen::Index>(batch) * p.traj_len;
    if (in.size() != head + static_cast<std::size_t>(cols) * 16) {
        throw IoError("noise prior '" + path.string() + "': size does not match header");
    }
    p.z.resize(2, cols);
    std::size_t pos = head;
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < 2; ++i, pos += 8) p.z(i, j) = std::bit_cast<double>(get_u64(in, pos));
    }
    const auto side_path = sidecar_path(path);
    if (std::filesystem::exists(side_path)) {
        const auto side = nlohmann::json::parse(read_text_file(side_path));
        if (side.contains("provenance")) p.provenance = side["provenance"];
        if (side.contains("ablation")) p.ablation = ablation_from_string(side["ablation"].get<std::string>());
    }
    return p;
}

}  // namespace mobgen
