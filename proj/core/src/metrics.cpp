#include "mobgen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "mobgen/error.hpp"
#include "mobgen/io.hpp"
#include "mobgen/parallel.hpp"

namespace mobgen {

namespace {

std::vector<Coord> coords(const Trajectory& traj, int grid_side) {
    std::vector<Coord> out;
    out.reserve(traj.length());
    for (auto l : traj.locs) out.push_back(loc_to_coord(grid_side, l));
    return out;
}

void require_same_shape(const FlowMatrix& a, const FlowMatrix& b, const char* what) {
    if (a.size() != b.size()) {
        throw InvalidArgument(std::string(what) + ": flow matrices differ in size (" + std::to_string(a.size()) +
                              " vs " + std::to_string(b.size()) + ")");
    }
}

struct TrajectoryHash {
    std::size_t operator()(const Trajectory& t) const noexcept {
        std::uint64_t h = 1469598103934665603ULL;
        for (auto l : t.locs) {
            h ^= l.index;
            h *= 1099511628211ULL;
        }
        return static_cast<std::size_t>(h);
    }
};

}  // namespace

double radius_of_gyration(std::span<const Coord> points) {
    if (points.empty()) {
        throw InvalidArgument("radius_of_gyration: empty trajectory");
    }
    double mx = 0.0;
    double my = 0.0;
    for (const auto& p : points) {
        mx += p.x;
        my += p.y;
    }
    const auto n = static_cast<double>(points.size());
    mx /= n;
    my /= n;
    double sq = 0.0;
    for (const auto& p : points) sq += (p.x - mx) * (p.x - mx) + (p.y - my) * (p.y - my);
    return std::sqrt(sq / n);
}

double radius_of_gyration(const Trajectory& traj, int grid_side) {
    const auto c = coords(traj, grid_side);
    return radius_of_gyration(c);
}

std::vector<double> travel_distances(const Trajectory& traj, int grid_side) {
    std::vector<double> out;
    for (std::size_t i = 0; i + 1 < traj.length(); ++i) {
        if (traj.locs[i] == traj.locs[i + 1]) continue;
        const Coord a = loc_to_coord(grid_side, traj.locs[i]);
        const Coord b = loc_to_coord(grid_side, traj.locs[i + 1]);
        out.push_back(std::hypot(b.x - a.x, b.y - a.y));
    }
    return out;
}

std::vector<int> durations(const Trajectory& traj) {
    std::vector<int> out;
    if (traj.length() == 0 || traj.is_static()) return out;
    int run = 1;
    for (std::size_t i = 1; i < traj.length(); ++i) {
        if (traj.locs[i] == traj.locs[i - 1]) {
            ++run;
        } else {
            out.push_back(run);
            run = 1;
        }
    }
    out.push_back(run);
    return out;
}

int dailyloc(const Trajectory& traj) {
    std::vector<std::uint32_t> ids;
    ids.reserve(traj.length());
    for (auto l : traj.locs) ids.push_back(l.index);
    std::sort(ids.begin(), ids.end());
    return static_cast<int>(std::unique(ids.begin(), ids.end()) - ids.begin());
}

double ks_statistic(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) {
        throw InvalidArgument("ks_statistic: empty sample");
    }
    std::vector<double> sa(a.begin(), a.end());
    std::vector<double> sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    const auto n = static_cast<double>(sa.size());
    const auto m = static_cast<double>(sb.size());
    std::size_t i = 0;
    std::size_t j = 0;
    double d = 0.0;
    while (i < sa.size() || j < sb.size()) {
        double x;
        if (j == sb.size() || (i < sa.size() && sa[i] <= sb[j])) {
            x = sa[i];
        } else {
            x = sb[j];
        }
        while (i < sa.size() && sa[i] <= x) ++i;
        while (j < sb.size() && sb[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
    }
    return d;
}

double cpc(const FlowMatrix& fx, const FlowMatrix& fy) {
    require_same_shape(fx, fy, "cpc");
    double common = 0.0;
    double sx = 0.0;
    double sy = 0.0;
    const auto x = fx.data();
    const auto y = fy.data();
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] < 0.0 || y[i] < 0.0) {
            throw InvalidArgument("cpc: negative flow");
        }
        common += std::min(x[i], y[i]);
        sx += x[i];
        sy += y[i];
    }
    if (!(sx + sy > 0.0)) {
        throw InvalidArgument("cpc: both flow matrices are zero");
    }
    return 2.0 * common / (sx + sy);
}

FlowMatrix transition_matrix(const FlowMatrix& f) {
    FlowMatrix out(f.size(), f.include_self());
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double s = f.row_sum(i);
        if (!(s > 0.0)) continue;
        for (std::size_t j = 0; j < f.size(); ++j) out(i, j) = f(i, j) / s;
    }
    return out;
}

FlowMatrix unit_total(const FlowMatrix& f) {
    const double s = f.total();
    if (!(s > 0.0)) {
        throw InvalidArgument("unit_total: flow matrix is zero");
    }
    FlowMatrix out(f.size(), f.include_self());
    for (std::size_t i = 0; i < f.size(); ++i) {
        for (std::size_t j = 0; j < f.size(); ++j) out(i, j) = f(i, j) / s;
    }
    return out;
}

double mape(const FlowMatrix& fx, const FlowMatrix& fy, double threshold, MapeAveraging averaging) {
    require_same_shape(fx, fy, "mape");
    if (!(threshold > 0.0)) {
        throw InvalidArgument("mape: threshold must be positive");
    }
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < fx.size(); ++i) {
        double row = 0.0;
        std::size_t n = 0;
        for (std::size_t j = 0; j < fx.size(); ++j) {
            const double x = fx(i, j);
            if (x < threshold) continue;
            row += std::abs(x - fy(i, j)) / x;
            ++n;
        }
        if (n == 0) continue;
        if (averaging == MapeAveraging::per_row) {
            total += row / static_cast<double>(n);
            ++count;
        } else {
            total += row;
            count += n;
        }
    }
    if (count == 0) {
        throw InvalidArgument("mape: no reference entry reaches the threshold");
    }
    return total / static_cast<double>(count);
}

double diversity(const TrajectoryDataset& gen, const TrajectoryDataset& real) {
    if (gen.size() == 0) {
        throw InvalidArgument("diversity: empty generated dataset");
    }
    const std::unordered_set<Trajectory, TrajectoryHash> seen(real.trajectories().begin(),
                                                              real.trajectories().end());
    std::size_t hits = 0;
    for (const auto& t : gen.trajectories()) hits += seen.count(t);
    return static_cast<double>(hits) / static_cast<double>(gen.size());
}

TrajectoryStats trajectory_stats(const TrajectoryDataset& ds) {
    const int g = ds.grid_side();
    const double km = ds.cell_extent() * g / 2.0;
    const auto& trajs = ds.trajectories();
    std::vector<TrajectoryStats> per(trajs.size());
    parallel_for(trajs.size(), [&](std::size_t i) {
        auto& s = per[i];
        const auto& t = trajs[i];
        s.radius.push_back(radius_of_gyration(t, g) * km);
        if (t.is_static()) return;
        for (double d : travel_distances(t, g)) s.distance.push_back(d * km);
        for (int d : durations(t)) s.duration.push_back(d);
        s.dailyloc.push_back(dailyloc(t));
    });
    TrajectoryStats out;
    for (const auto& s : per) {
        out.radius.insert(out.radius.end(), s.radius.begin(), s.radius.end());
        out.distance.insert(out.distance.end(), s.distance.begin(), s.distance.end());
        out.duration.insert(out.duration.end(), s.duration.begin(), s.duration.end());
        out.dailyloc.insert(out.dailyloc.end(), s.dailyloc.begin(), s.dailyloc.end());
    }
    return out;
}

nlohmann::json to_json(const MetricReport& r) {
    return {{"ks_radius", r.ks_radius},
            {"ks_distance", r.ks_distance},
            {"ks_duration", r.ks_duration},
            {"ks_dailyloc", r.ks_dailyloc},
            {"cpc", r.cpc},
            {"mape", r.mape},
            {"diversity", r.diversity},
            {"n_real", r.n_real},
            {"n_gen", r.n_gen},
            {"n_real_moving", r.n_real_moving},
            {"n_gen_moving", r.n_gen_moving},
            {"n_real_moves", r.n_real_moves},
            {"n_gen_moves", r.n_gen_moves}};
}

MetricReport metric_report_from_json(const nlohmann::json& j) {
    MetricReport r;
    try {
        r.ks_radius = j.at("ks_radius").get<double>();
        r.ks_distance = j.at("ks_distance").get<double>();
        r.ks_duration = j.at("ks_duration").get<double>();
        r.ks_dailyloc = j.at("ks_dailyloc").get<double>();
        r.cpc = j.at("cpc").get<double>();
        r.mape = j.at("mape").get<double>();
        r.diversity = j.at("diversity").get<double>();
        r.n_real = j.at("n_real").get<std::size_t>();
        r.n_gen = j.at("n_gen").get<std::size_t>();
        r.n_real_moving = j.at("n_real_moving").get<std::size_t>();
        r.n_gen_moving = j.at("n_gen_moving").get<std::size_t>();
        r.n_real_moves = j.at("n_real_moves").get<std::size_t>();
        r.n_gen_moves = j.at("n_gen_moves").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("metric report: ") + e.what());
    }
    return r;
}

MetricReport evaluate_all(const TrajectoryDataset& real, const TrajectoryDataset& gen, MapeAveraging averaging) {
    if (real.grid_side() != gen.grid_side() || real.traj_len() != gen.traj_len()) {
        throw InvalidArgument("evaluate_all: datasets describe different cities or trajectory lengths");
    }
    const auto sr = trajectory_stats(real);
    const auto sg = trajectory_stats(gen);
    if (sr.distance.empty() || sg.distance.empty()) {
        throw NumericError("evaluate_all: a dataset contains no moves");
    }
    MetricReport r;
    r.ks_radius = ks_statistic(sr.radius, sg.radius);
    r.ks_distance = ks_statistic(sr.distance, sg.distance);
    r.ks_duration = ks_statistic(sr.duration, sg.duration);
    r.ks_dailyloc = ks_statistic(sr.dailyloc, sg.dailyloc);
    const FlowMatrix fr = flows_from_dataset(real);
    const FlowMatrix fg = flows_from_dataset(gen);
    r.cpc = cpc(unit_total(fr), unit_total(fg));
    r.mape = mape(transition_matrix(fr), transition_matrix(fg), 0.01, averaging);
    r.diversity = diversity(gen, real);
    r.n_real = real.size();
    r.n_gen = gen.size();
    r.n_real_moving = sr.dailyloc.size();
    r.n_gen_moving = sg.dailyloc.size();
    r.n_real_moves = sr.distance.size();
    r.n_gen_moves = sg.distance.size();
    return r;
}

std::string distribution_csv(const TrajectoryStats& real, const TrajectoryStats& gen) {
    std::ostringstream out;
    out << "metric,set,value\n";
    auto emit = [&](const char* metric, const char* set, std::vector<double> v) {
        std::sort(v.begin(), v.end());
        for (double x : v) out << metric << ',' << set << ',' << format_double(x) << '\n';
    };
    emit("radius", "real", real.radius);
    emit("radius", "generated", gen.radius);
    emit("distance", "real", real.distance);
    emit("distance", "generated", gen.distance);
    emit("duration", "real", real.duration);
    emit("duration", "generated", gen.duration);
    emit("dailyloc", "real", real.dailyloc);
    emit("dailyloc", "generated", gen.dailyloc);
    return out.str();
}

}  // namespace mobgen
