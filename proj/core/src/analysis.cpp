#include "mobgen/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "mobgen/error.hpp"
#include "mobgen/hash.hpp"
#include "mobgen/io.hpp"
#include "mobgen/noise_prior.hpp"
#include "mobgen/rng.hpp"

namespace mobgen {

nlohmann::json to_json(const RegressionResult& r) {
    return {{"slope", r.slope}, {"intercept", r.intercept}, {"r_squared", r.r_squared}, {"n_points", r.n_points}};
}

RegressionResult least_squares(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw InvalidArgument("least_squares: x and y differ in length");
    }
    if (x.size() < 3) {
        throw InvalidArgument("least_squares: need at least 3 points, got " + std::to_string(x.size()));
    }
    const auto n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0.0)) {
        throw NumericError("least_squares: constant regressor");
    }
    RegressionResult r;
    r.slope = sxy / sxx;
    r.intercept = my - r.slope * mx;
    r.n_points = x.size();
    if (syy > 0.0) {
        double ss_res = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double e = y[i] - (r.intercept + r.slope * x[i]);
            ss_res += e * e;
        }
        r.r_squared = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
    } else {
        r.r_squared = 1.0;
    }
    return r;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw InvalidArgument("pearson: need two equally long samples of size >= 2");
    }
    const auto n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

double unwrap_near(double angle, double reference) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double a = angle + two_pi * std::round((reference - angle) / two_pi);
    if (a - reference > std::numbers::pi) a -= two_pi;
    if (reference - a > std::numbers::pi) a += two_pi;
    return a;
}

std::vector<MovePair> pair_moves(const TrajectoryDataset& ds, const TrajBatch& z) {
    const int T = ds.traj_len();
    if (z.rows() != 2 || z.cols() != static_cast<Eigen::Index>(ds.size()) * T) {
        throw InvalidArgument("pair_moves: noise batch does not match the dataset shape");
    }
    std::vector<MovePair> out;
    for (std::size_t b = 0; b < ds.size(); ++b) {
        const auto& t = ds[b];
        for (int s = 1; s < T; ++s) {
            if (t.locs[static_cast<std::size_t>(s)] == t.locs[static_cast<std::size_t>(s - 1)]) continue;
            const Coord p = loc_to_coord(ds.grid_side(), t.locs[static_cast<std::size_t>(s - 1)]);
            const Coord q = loc_to_coord(ds.grid_side(), t.locs[static_cast<std::size_t>(s)]);
            const auto c = static_cast<Eigen::Index>(b) * T + s;
            const double nx = z(0, c) - z(0, c - 1);
            const double ny = z(1, c) - z(1, c - 1);
            MovePair m;
            m.traj = b;
            m.slot = s;
            m.real_angle = std::atan2(q.y - p.y, q.x - p.x);
            m.noise_angle = unwrap_near(std::atan2(ny, nx), m.real_angle);
            m.real_distance = std::hypot(q.x - p.x, q.y - p.y);
            m.noise_distance = std::hypot(nx, ny);
            out.push_back(m);
        }
    }
    return out;
}

RegressionResult direction_regression(std::span<const MovePair> moves) {
    std::vector<double> x;
    std::vector<double> y;
    for (const auto& m : moves) {
        x.push_back(m.real_angle);
        y.push_back(m.noise_angle);
    }
    return least_squares(x, y);
}

RegressionResult distance_regression(std::span<const MovePair> moves) {
    std::vector<double> x;
    std::vector<double> y;
    for (const auto& m : moves) {
        x.push_back(m.real_distance);
        y.push_back(m.noise_distance);
    }
    return least_squares(x, y);
}

TrajBatch invert_dataset(const EpsModel& model, const TrajectoryDataset& ds, const VpSchedule& sched, int n_steps,
                         std::size_t chunk) {
    return invert_transitions_to_noise(model, ds.trajectories(), ds.grid_side(), ds.affine(), sched, n_steps, chunk);
}

RegressionResult direction_regression(const EpsModel& model, const TrajectoryDataset& ds, const VpSchedule& sched,
                                      int n_steps) {
    const auto moves = pair_moves(ds, invert_dataset(model, ds, sched, n_steps));
    return direction_regression(moves);
}

RegressionResult distance_regression(const EpsModel& model, const TrajectoryDataset& ds, const VpSchedule& sched,
                                     int n_steps) {
    const auto moves = pair_moves(ds, invert_dataset(model, ds, sched, n_steps));
    return distance_regression(moves);
}

VarianceRhythm variance_rhythm(const TrajBatch& z, int traj_len, std::span<const double> move_probability) {
    if (traj_len < 1 || z.cols() % traj_len != 0 || z.rows() != 2) {
        throw InvalidArgument("variance_rhythm: noise batch is not 2 x (B*T)");
    }
    if (move_probability.size() != static_cast<std::size_t>(traj_len)) {
        throw InvalidArgument("variance_rhythm: moving probability length differs from T");
    }
    const Eigen::Index B = z.cols() / traj_len;
    if (B < 2) {
        throw InvalidArgument("variance_rhythm: need at least 2 trajectories");
    }
    VarianceRhythm v;
    v.variance.assign(static_cast<std::size_t>(traj_len), 0.0);
    for (int t = 0; t < traj_len; ++t) {
        double acc = 0.0;
        for (Eigen::Index ch = 0; ch < 2; ++ch) {
            double mean = 0.0;
            for (Eigen::Index b = 0; b < B; ++b) mean += z(ch, b * traj_len + t);
            mean /= static_cast<double>(B);
            double var = 0.0;
            for (Eigen::Index b = 0; b < B; ++b) {
                const double d = z(ch, b * traj_len + t) - mean;
                var += d * d;
            }
            acc += var / static_cast<double>(B);
        }
        v.variance[static_cast<std::size_t>(t)] = acc / 2.0;
    }
    v.move_probability.assign(move_probability.begin(), move_probability.end());
    v.correlation = pearson(v.variance, v.move_probability);
    return v;
}

VarianceRhythm variance_rhythm(const EpsModel& model, const TrajectoryDataset& ds, const VpSchedule& sched,
                               int n_steps) {
    return variance_rhythm(invert_dataset(model, ds, sched, n_steps), ds.traj_len(), moving_probability(ds));
}

nlohmann::json to_json(const VarianceRhythm& v) {
    nlohmann::json j;
    j["variance"] = v.variance;
    j["move_probability"] = v.move_probability;
    j["correlation"] = v.correlation ? nlohmann::json(*v.correlation) : nlohmann::json(nullptr);
    return j;
}

NoiseAnalysis analyze_noise(const EpsModel& model, const TrajectoryDataset& ds, const VpSchedule& sched,
                            int n_steps, std::size_t chunk, std::uint64_t shuffle_seed) {
    NoiseAnalysis a;
    a.z = invert_dataset(model, ds, sched, n_steps, chunk);
    a.moves = pair_moves(ds, a.z);
    a.direction = direction_regression(a.moves);
    a.distance = distance_regression(a.moves);
    std::vector<double> raw(a.moves.size());
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = a.moves[i].noise_angle;
    Rng rng = make_rng(shuffle_seed, 0);
    std::shuffle(raw.begin(), raw.end(), rng);
    std::vector<MovePair> shuffled = a.moves;
    for (std::size_t i = 0; i < shuffled.size(); ++i) {
        shuffled[i].noise_angle = unwrap_near(raw[i], shuffled[i].real_angle);
    }
    a.direction_shuffled = direction_regression(shuffled);
    a.rhythm = variance_rhythm(a.z, ds.traj_len(), moving_probability(ds));
    return a;
}

nlohmann::json to_json(const NoiseAnalysis& a) {
    return {{"n_trajectories", a.z.cols() > 0 ? a.z.cols() / static_cast<Eigen::Index>(a.rhythm.variance.size()) : 0},
            {"n_moves", a.moves.size()},
            {"direction", to_json(a.direction)},
            {"distance", to_json(a.distance)},
            {"direction_shuffled_pairs", to_json(a.direction_shuffled)},
            {"variance_rhythm", to_json(a.rhythm)}};
}

std::string move_scatter_csv(std::span<const MovePair> moves) {
    std::ostringstream out;
    out << "traj,slot,real_angle,noise_angle,real_distance,noise_distance\n";
    for (const auto& m : moves) {
        out << m.traj << ',' << m.slot << ',' << format_double(m.real_angle) << ',' << format_double(m.noise_angle)
            << ',' << format_double(m.real_distance) << ',' << format_double(m.noise_distance) << '\n';
    }
    return out.str();
}

void export_noise_vectors(const std::filesystem::path& path, const TrajBatch& z, const TrajectoryDataset& ds) {
    const int T = ds.traj_len();
    if (z.rows() != 2 || z.cols() != static_cast<Eigen::Index>(ds.size()) * T) {
        throw InvalidArgument("export_noise_vectors: noise batch does not match the dataset shape");
    }
    std::ostringstream out;
    out << "index,home,moving";
    for (int t = 0; t < T; ++t) out << ",x" << t << ",y" << t;
    out << '\n';
    for (std::size_t b = 0; b < ds.size(); ++b) {
        out << b << ',' << ds[b].at(0).index << ',' << (ds[b].is_static() ? 0 : 1);
        for (int t = 0; t < T; ++t) {
            const auto c = static_cast<Eigen::Index>(b) * T + t;
            out << ',' << format_double(z(0, c)) << ',' << format_double(z(1, c));
        }
        out << '\n';
    }
    write_with_sidecar(path, out.str(), std::nullopt, "noise_vectors",
                       {{"rows", ds.size()}, {"traj_len", T}, {"dataset_sha256", sha256_hex(serialize_dataset(ds))}});
}

TrajBatch read_noise_vectors(const std::filesystem::path& path, int traj_len) {
    const std::string text = read_verified(path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) {
        throw IoError(path.string() + ": empty noise vector file");
    }
    std::vector<double> values;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell;
        int col = 0;
        while (std::getline(row, cell, ',')) {
            if (col++ >= 3) values.push_back(parse_double(cell));
        }
        if (col != 3 + 2 * traj_len) {
            throw IoError(path.string() + ": row " + std::to_string(rows + 1) + " has " + std::to_string(col) +
                          " columns, expected " + std::to_string(3 + 2 * traj_len));
        }
        ++rows;
    }
    TrajBatch z(2, static_cast<Eigen::Index>(rows) * traj_len);
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
        z(0, c) = values[static_cast<std::size_t>(2 * c)];
        z(1, c) = values[static_cast<std::size_t>(2 * c + 1)];
    }
    return z;
}

}  // namespace mobgen
