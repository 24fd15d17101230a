#include "mobgen/privacy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mobgen/error.hpp"
#include "mobgen/io.hpp"
#include "mobgen/parallel.hpp"
#include "mobgen/rng.hpp"

namespace mobgen {

namespace {

constexpr double kLogisticRate = 0.1;
constexpr double kLogisticL2 = 1e-3;
constexpr double kHingeRate = 0.05;
constexpr double kHingeL2 = 1e-3;
constexpr int kLinearEpochs = 500;
constexpr int kStumpRounds = 50;

std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count, Rng& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < count; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(count);
    return idx;
}

using Row = MiaFeatures;

struct Linear {
    Row w{};
    double b = 0.0;
    double score(const Row& x) const {
        double s = b;
        for (std::size_t f = 0; f < kMiaFeatures; ++f) s += w[f] * x[f];
        return s;
    }
};

Linear fit_logistic(const std::vector<Row>& x, const std::vector<int>& y) {
    Linear m;
    const auto n = static_cast<double>(x.size());
    for (int epoch = 0; epoch < kLinearEpochs; ++epoch) {
        Row gw{};
        double gb = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double p = 1.0 / (1.0 + std::exp(-m.score(x[i])));
            const double r = p - y[i];
            for (std::size_t f = 0; f < kMiaFeatures; ++f) gw[f] += r * x[i][f];
            gb += r;
        }
        for (std::size_t f = 0; f < kMiaFeatures; ++f) m.w[f] -= kLogisticRate * (gw[f] / n + kLogisticL2 * m.w[f]);
        m.b -= kLogisticRate * gb / n;
    }
    return m;
}

Linear fit_hinge(const std::vector<Row>& x, const std::vector<int>& y) {
    Linear m;
    const auto n = static_cast<double>(x.size());
    for (int epoch = 0; epoch < kLinearEpochs; ++epoch) {
        Row gw{};
        double gb = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double t = y[i] ? 1.0 : -1.0;
            if (t * m.score(x[i]) >= 1.0) continue;
            for (std::size_t f = 0; f < kMiaFeatures; ++f) gw[f] -= t * x[i][f];
            gb -= t;
        }
        for (std::size_t f = 0; f < kMiaFeatures; ++f) m.w[f] -= kHingeRate * (gw[f] / n + kHingeL2 * m.w[f]);
        m.b -= kHingeRate * gb / n;
    }
    return m;
}

struct Stump {
    std::size_t feature = 0;
    double threshold = 0.0;
    double polarity = 1.0;  // +1 predicts member above the threshold
    double alpha = 0.0;
    double vote(const Row& x) const { return x[feature] > threshold ? polarity : -polarity; }
};

/// Discrete AdaBoost over depth-1 trees.
std::vector<Stump> fit_stumps(const std::vector<Row>& x, const std::vector<int>& y) {
    const std::size_t n = x.size();
    std::vector<double> w(n, 1.0 / static_cast<double>(n));
    std::vector<Stump> out;
    std::vector<std::size_t> order(n);
    for (int round = 0; round < kStumpRounds; ++round) {
        Stump best;
        double best_err = 2.0;
        for (std::size_t f = 0; f < kMiaFeatures; ++f) {
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a][f] < x[b][f]; });
            // Weighted error of "member above threshold" with the threshold below every point.
            double err = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (!y[i]) err += w[i];
            }
            auto consider = [&](double e, double thr) {
                if (e < best_err) {
                    best_err = e;
                    best = {f, thr, 1.0, 0.0};
                }
                if (1.0 - e < best_err) {
                    best_err = 1.0 - e;
                    best = {f, thr, -1.0, 0.0};
                }
            };
            consider(err, x[order[0]][f] - 1.0);
            for (std::size_t r = 0; r < n; ++r) {
                const auto i = order[r];
                err += y[i] ? w[i] : -w[i];
                if (r + 1 < n && x[order[r + 1]][f] == x[i][f]) continue;
                const double thr = r + 1 < n ? 0.5 * (x[i][f] + x[order[r + 1]][f]) : x[i][f];
                consider(err, thr);
            }
        }
        best_err = std::clamp(best_err, 1e-12, 1.0 - 1e-12);
        if (best_err >= 0.5) break;
        best.alpha = 0.5 * std::log((1.0 - best_err) / best_err);
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double t = y[i] ? 1.0 : -1.0;
            w[i] *= std::exp(-best.alpha * t * best.vote(x[i]));
            total += w[i];
        }
        for (auto& v : w) v /= total;
        out.push_back(best);
    }
    return out;
}

}  // namespace

double overlap_ratio(const Trajectory& a, const Trajectory& b) {
    if (a.length() != b.length()) {
        throw InvalidArgument("overlap_ratio: trajectories differ in length (" + std::to_string(a.length()) + " vs " +
                              std::to_string(b.length()) + ")");
    }
    if (a.length() == 0) {
        throw InvalidArgument("overlap_ratio: empty trajectory");
    }
    std::size_t same = 0;
    for (std::size_t t = 0; t < a.length(); ++t) same += a.locs[t] == b.locs[t] ? 1 : 0;
    return static_cast<double>(same) / static_cast<double>(a.length());
}

double UniquenessResult::ecdf(std::size_t k_index, double x) const {
    const auto& v = values.at(k_index);
    if (v.empty()) return 0.0;
    return static_cast<double>(std::upper_bound(v.begin(), v.end(), x) - v.begin()) / static_cast<double>(v.size());
}

double UniquenessResult::fraction_below(std::size_t k_index, double x) const {
    const auto& v = values.at(k_index);
    if (v.empty()) return 0.0;
    return static_cast<double>(std::lower_bound(v.begin(), v.end(), x) - v.begin()) / static_cast<double>(v.size());
}

UniquenessResult uniqueness_ecdf(const TrajectoryDataset& gen, const TrajectoryDataset& real,
                                 const std::vector<int>& ks, std::size_t n_probe, std::uint64_t seed) {
    if (gen.size() == 0 || real.size() == 0) {
        throw InvalidArgument("uniqueness_ecdf: empty dataset");
    }
    if (ks.empty()) {
        throw InvalidArgument("uniqueness_ecdf: no k requested");
    }
    for (int k : ks) {
        if (k < 1 || static_cast<std::size_t>(k) > real.size()) {
            throw InvalidArgument("uniqueness_ecdf: k = " + std::to_string(k) + " outside [1, |real|]");
        }
    }
    UniquenessResult r;
    r.ks = ks;
    if (n_probe == 0 || n_probe >= gen.size()) {
        r.probes.resize(gen.size());
        std::iota(r.probes.begin(), r.probes.end(), 0);
    } else {
        Rng rng = make_rng(seed, 0);
        r.probes = sample_without_replacement(gen.size(), n_probe, rng);
    }
    const int k_max = *std::max_element(ks.begin(), ks.end());
    std::vector<std::vector<double>> per(r.probes.size());
    parallel_for(r.probes.size(), [&](std::size_t p) {
        const auto& g = gen[r.probes[p]];
        std::vector<double> o(real.size());
        for (std::size_t j = 0; j < real.size(); ++j) o[j] = overlap_ratio(g, real[j]);
        std::partial_sort(o.begin(), o.begin() + k_max, o.end(), std::greater<>());
        per[p].reserve(ks.size());
        for (int k : ks) per[p].push_back(o[static_cast<std::size_t>(k - 1)]);
    });
    r.values.assign(ks.size(), {});
    for (std::size_t i = 0; i < ks.size(); ++i) {
        for (const auto& v : per) r.values[i].push_back(v[i]);
        std::sort(r.values[i].begin(), r.values[i].end());
    }
    return r;
}

std::string uniqueness_csv(const UniquenessResult& r) {
    std::ostringstream out;
    out << "k,overlap,ecdf\n";
    for (std::size_t i = 0; i < r.ks.size(); ++i) {
        const auto& v = r.values[i];
        for (std::size_t j = 0; j < v.size(); ++j) {
            if (j + 1 < v.size() && v[j + 1] == v[j]) continue;
            out << r.ks[i] << ',' << format_double(v[j]) << ','
                << format_double(static_cast<double>(j + 1) / static_cast<double>(v.size())) << '\n';
        }
    }
    return out.str();
}

nlohmann::json to_json(const UniquenessResult& r) {
    nlohmann::json j;
    j["n_probe"] = r.probes.size();
    j["ks"] = r.ks;
    nlohmann::json below = nlohmann::json::object();
    for (std::size_t i = 0; i < r.ks.size(); ++i) {
        below[std::to_string(r.ks[i])] = r.fraction_below(i, 0.4);
    }
    j["fraction_below_0.4"] = below;
    return j;
}

double coordinate_distance(const Trajectory& a, const Trajectory& b, int grid_side) {
    if (a.length() != b.length() || a.length() == 0) {
        throw InvalidArgument("coordinate_distance: trajectories must be non-empty and of equal length");
    }
    double sq = 0.0;
    for (std::size_t t = 0; t < a.length(); ++t) {
        const Coord p = loc_to_coord(grid_side, a.locs[t]);
        const Coord q = loc_to_coord(grid_side, b.locs[t]);
        sq += (p.x - q.x) * (p.x - q.x) + (p.y - q.y) * (p.y - q.y);
    }
    return std::sqrt(sq / static_cast<double>(a.length()));
}

MiaFeatures mia_features(const Trajectory& candidate, const TrajectoryDataset& gen, int k) {
    if (gen.size() == 0) {
        throw InvalidArgument("mia_features: empty generated dataset");
    }
    if (k < 1) {
        throw InvalidArgument("mia_features: k must be at least 1");
    }
    const auto kk = std::min<std::size_t>(static_cast<std::size_t>(k), gen.size());
    std::vector<double> o(gen.size());
    std::vector<double> d(gen.size());
    for (std::size_t j = 0; j < gen.size(); ++j) {
        o[j] = overlap_ratio(candidate, gen[j]);
        d[j] = coordinate_distance(candidate, gen[j], gen.grid_side());
    }
    std::partial_sort(o.begin(), o.begin() + static_cast<std::ptrdiff_t>(kk), o.end(), std::greater<>());
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(kk), d.end());
    const double n = static_cast<double>(kk);
    return {o[0], std::accumulate(o.begin(), o.begin() + static_cast<std::ptrdiff_t>(kk), 0.0) / n, d[0],
            std::accumulate(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(kk), 0.0) / n};
}

std::string to_string(MiaClassifier c) {
    switch (c) {
        case MiaClassifier::logistic: return "logistic";
        case MiaClassifier::hinge: return "hinge";
        case MiaClassifier::stumps: return "stumps";
    }
    return "unknown";
}

MiaClassifier mia_classifier_from_string(const std::string& s) {
    if (s == "logistic") return MiaClassifier::logistic;
    if (s == "hinge") return MiaClassifier::hinge;
    if (s == "stumps") return MiaClassifier::stumps;
    throw InvalidArgument("unknown classifier '" + s + "' (expected logistic, hinge or stumps)");
}

void MiaProtocol::validate() const {
    if (n_members < 2 || n_nonmembers < 2) {
        throw InvalidArgument("mia: need at least 2 members and 2 nonmembers");
    }
    if (!(calibration_fraction > 0.0 && calibration_fraction < 1.0)) {
        throw InvalidArgument("mia: calibration fraction must lie in (0, 1)");
    }
    if (k_nn < 1) {
        throw InvalidArgument("mia: k_nn must be at least 1");
    }
    if (classifiers.empty()) {
        throw InvalidArgument("mia: no classifier selected");
    }
}

double MiaResult::max_success() const {
    double m = 0.0;
    for (const auto& s : scores) m = std::max(m, s.success);
    return m;
}

double MiaResult::min_success() const {
    double m = 1.0;
    for (const auto& s : scores) m = std::min(m, s.success);
    return m;
}

nlohmann::json to_json(const MiaResult& r) {
    nlohmann::json j;
    j["protocol"] = "black-box distance features against the generated set";
    j["n_calibration"] = r.n_calibration;
    j["n_evaluation"] = r.n_evaluation;
    nlohmann::json scores = nlohmann::json::object();
    for (const auto& s : r.scores) scores[to_string(s.classifier)] = s.success;
    j["success"] = scores;
    return j;
}

MiaResult fit_and_score(const LabelledFeatures& data, std::size_t n_calibration,
                        const std::vector<MiaClassifier>& classifiers) {
    const std::size_t n = data.x.size();
    if (data.y.size() != n || n_calibration == 0 || n_calibration >= n) {
        throw InvalidArgument("mia: calibration split must leave rows on both sides");
    }
    const auto pos = std::count(data.y.begin(), data.y.begin() + static_cast<std::ptrdiff_t>(n_calibration), 1);
    if (pos == 0 || pos == static_cast<std::ptrdiff_t>(n_calibration)) {
        throw InvalidArgument("mia: calibration split holds a single class");
    }
    Row mean{};
    Row sd{};
    for (std::size_t i = 0; i < n_calibration; ++i) {
        for (std::size_t f = 0; f < kMiaFeatures; ++f) mean[f] += data.x[i][f];
    }
    for (auto& v : mean) v /= static_cast<double>(n_calibration);
    for (std::size_t i = 0; i < n_calibration; ++i) {
        for (std::size_t f = 0; f < kMiaFeatures; ++f) sd[f] += (data.x[i][f] - mean[f]) * (data.x[i][f] - mean[f]);
    }
    for (auto& v : sd) {
        v = std::sqrt(v / static_cast<double>(n_calibration));
        if (!(v > 0.0)) v = 1.0;
    }
    std::vector<Row> xs(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t f = 0; f < kMiaFeatures; ++f) xs[i][f] = (data.x[i][f] - mean[f]) / sd[f];
    }
    const std::vector<Row> cal_x(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(n_calibration));
    const std::vector<int> cal_y(data.y.begin(), data.y.begin() + static_cast<std::ptrdiff_t>(n_calibration));

    MiaResult r;
    r.n_calibration = n_calibration;
    r.n_evaluation = n - n_calibration;
    for (auto c : classifiers) {
        std::function<int(const Row&)> predict;
        if (c == MiaClassifier::logistic) {
            const Linear m = fit_logistic(cal_x, cal_y);
            predict = [m](const Row& x) { return m.score(x) > 0.0 ? 1 : 0; };
        } else if (c == MiaClassifier::hinge) {
            const Linear m = fit_hinge(cal_x, cal_y);
            predict = [m](const Row& x) { return m.score(x) > 0.0 ? 1 : 0; };
        } else {
            const auto stumps = fit_stumps(cal_x, cal_y);
            predict = [stumps](const Row& x) {
                double s = 0.0;
                for (const auto& st : stumps) s += st.alpha * st.vote(x);
                return s > 0.0 ? 1 : 0;
            };
        }
        std::size_t correct = 0;
        for (std::size_t i = n_calibration; i < n; ++i) correct += predict(xs[i]) == data.y[i] ? 1 : 0;
        r.scores.push_back({c, static_cast<double>(correct) / static_cast<double>(r.n_evaluation)});
    }
    return r;
}

MiaResult run_mia(const MiaProtocol& protocol, const TrajectoryDataset& train_set,
                  const TrajectoryDataset& holdout_set, const TrajectoryDataset& gen) {
    protocol.validate();
    if (protocol.n_members > train_set.size() || protocol.n_nonmembers > holdout_set.size()) {
        throw InvalidArgument("mia: pools smaller than the requested member / nonmember counts");
    }
    if (gen.size() == 0) {
        throw InvalidArgument("mia: empty generated dataset");
    }
    Rng rng = make_rng(protocol.seed, 0);
    const auto members = sample_without_replacement(train_set.size(), protocol.n_members, rng);
    const auto nonmembers = sample_without_replacement(holdout_set.size(), protocol.n_nonmembers, rng);

    std::vector<const Trajectory*> cand;
    std::vector<int> labels;
    for (auto i : members) {
        cand.push_back(&train_set[i]);
        labels.push_back(1);
    }
    for (auto i : nonmembers) {
        cand.push_back(&holdout_set[i]);
        labels.push_back(0);
    }
    std::vector<std::size_t> order(cand.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    if (protocol.shuffle_labels) std::shuffle(labels.begin(), labels.end(), rng);

    LabelledFeatures data;
    data.x.resize(cand.size());
    data.y.resize(cand.size());
    parallel_for(order.size(), [&](std::size_t i) {
        data.x[i] = mia_features(*cand[order[i]], gen, protocol.k_nn);
        data.y[i] = labels[order[i]];
    });
    const auto n_cal = static_cast<std::size_t>(std::llround(protocol.calibration_fraction * static_cast<double>(cand.size())));
    return fit_and_score(data, std::clamp<std::size_t>(n_cal, 1, cand.size() - 1), protocol.classifiers);
}

}  // namespace mobgen
