#include "mobgen/diffusion.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "mobgen/error.hpp"
#include "mobgen/hash.hpp"
#include "mobgen/io.hpp"
#include "mobgen/parallel.hpp"

namespace mobgen {

BatchCondition BatchCondition::null_batch(std::size_t b) {
    BatchCondition c;
    c.start.assign(b, Coord{});
    c.is_null.assign(b, 1);
    return c;
}

double VpSchedule::alpha(int k) const {
    if (k < 0 || k > K) {
        throw InvalidArgument("VpSchedule: step " + std::to_string(k) + " outside [0, " + std::to_string(K) + "]");
    }
    return k == 0 ? 1.0 : alpha_bar[static_cast<std::size_t>(k - 1)];
}

std::string VpSchedule::hash() const {
    std::ostringstream os;
    os << "vp:" << K << ":p" << format_double(spacing);
    for (double b : beta) os << ',' << format_double(b);
    return sha256_hex(os.str());
}

VpSchedule make_vp_schedule(std::vector<double> beta) {
    if (beta.empty()) {
        throw InvalidArgument("make_vp_schedule: empty beta");
    }
    for (std::size_t i = 0; i < beta.size(); ++i) {
        if (!(beta[i] > 0.0 && beta[i] < 1.0)) {
            throw InvalidArgument("make_vp_schedule: beta must lie in (0, 1)");
        }
        if (i > 0 && !(beta[i] > beta[i - 1])) {
            throw InvalidArgument("make_vp_schedule: beta must be strictly increasing");
        }
    }
    VpSchedule s;
    s.K = static_cast<int>(beta.size());
    s.alpha_bar.resize(beta.size());
    double a = 1.0;
    for (std::size_t i = 0; i < beta.size(); ++i) {
        a *= 1.0 - beta[i];
        s.alpha_bar[i] = a;
    }
    s.beta = std::move(beta);
    return s;
}

VpSchedule make_vp_schedule(int K, double beta_min, double beta_max) {
    if (K < 2) {
        throw InvalidArgument("make_vp_schedule: K must be at least 2");
    }
    if (!(beta_min > 0.0 && beta_min < beta_max && beta_max < 1.0)) {
        throw InvalidArgument("make_vp_schedule: need 0 < beta_min < beta_max < 1");
    }
    std::vector<double> beta(static_cast<std::size_t>(K));
    for (int i = 0; i < K; ++i) {
        beta[static_cast<std::size_t>(i)] = beta_min + (beta_max - beta_min) * i / (K - 1);
    }
    return make_vp_schedule(std::move(beta));
}

std::vector<int> sampling_steps(int K, int n_steps, double power) {
    if (K < 1 || n_steps < 1 || n_steps > K) {
        throw InvalidArgument("sampling_steps: need 1 <= n_steps <= K");
    }
    if (!(power >= 1.0) || !std::isfinite(power)) {
        throw InvalidArgument("sampling_steps: spacing power must be at least 1");
    }
    std::vector<int> up(static_cast<std::size_t>(n_steps) + 1, 0);
    for (int i = 1; i <= n_steps; ++i) {
        const double u = static_cast<double>(i) / n_steps;
        const auto k = static_cast<int>(std::lround(K * std::pow(u, power)));
        up[static_cast<std::size_t>(i)] = std::max(k, up[static_cast<std::size_t>(i - 1)] + 1);
    }
    if (up.back() != K) {
        throw InvalidArgument("sampling_steps: " + std::to_string(n_steps) + " steps do not fit K = " +
                              std::to_string(K) + " at spacing power " + format_double(power));
    }
    return {up.rbegin(), up.rend()};
}

std::vector<int> sampling_steps(const VpSchedule& sched, int n_steps) {
    return sampling_steps(sched.K, n_steps, sched.spacing);
}

TrajBatch forward_diffuse(const TrajBatch& x0, int k, const TrajBatch& z, const VpSchedule& sched) {
    if (x0.rows() != z.rows() || x0.cols() != z.cols()) {
        throw InvalidArgument("forward_diffuse: noise shape differs from data shape");
    }
    const double a = sched.alpha(k);
    return std::sqrt(a) * x0 + std::sqrt(1.0 - a) * z;
}

double ancestral_sigma(double alpha_from, double alpha_to) {
    if (alpha_from >= 1.0) return 0.0;
    const double v = (1.0 - alpha_to) / (1.0 - alpha_from) * (1.0 - alpha_from / alpha_to);
    return std::sqrt(std::max(0.0, v));
}

TrajBatch ddim_transition(const TrajBatch& x, const TrajBatch& eps, double alpha_from, double alpha_to,
                          double sigma, const TrajBatch* noise) {
    const TrajBatch x0_hat = (x - std::sqrt(1.0 - alpha_from) * eps) / std::sqrt(alpha_from);
    const double dir = std::sqrt(std::max(0.0, 1.0 - alpha_to - sigma * sigma));
    TrajBatch out = std::sqrt(alpha_to) * x0_hat + dir * eps;
    if (sigma > 0.0) {
        if (noise == nullptr) {
            throw InvalidArgument("ddim_transition: stochastic move without noise");
        }
        out += sigma * *noise;
    }
    return out;
}

TrajBatch ddim_step(const TrajBatch& x_k, const TrajBatch& eps_hat, int k, const VpSchedule& sched,
                    bool stochastic, Rng* rng) {
    if (k < 1 || k > sched.K) {
        throw InvalidArgument("ddim_step: step " + std::to_string(k) + " outside [1, K]");
    }
    const double a_from = sched.alpha(k);
    const double a_to = sched.alpha(k - 1);
    if (!stochastic) return ddim_transition(x_k, eps_hat, a_from, a_to);
    if (rng == nullptr) {
        throw InvalidArgument("ddim_step: stochastic step needs a generator");
    }
    TrajBatch noise(x_k.rows(), x_k.cols());
    for (Eigen::Index j = 0; j < noise.cols(); ++j) {
        for (Eigen::Index i = 0; i < noise.rows(); ++i) noise(i, j) = standard_normal(*rng);
    }
    return ddim_transition(x_k, eps_hat, a_from, a_to, ancestral_sigma(a_from, a_to), &noise);
}

void require_finite(const TrajBatch& x, const std::string& where) {
    if (!x.allFinite()) {
        throw NumericError("non-finite values in " + where);
    }
}

TrajBatch DenoiserEps::eps(const TrajBatch& x, double alpha_bar, const BatchCondition& cond) const {
    const double sigma = sigma_from_alpha(alpha_bar);
    const TrajBatch x_ve = vp_to_ve(x, alpha_bar);
    const Eigen::VectorXd s = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(cond.batch()), sigma);
    return eps_from_denoised(x_ve, d_.denoise(x_ve, s, cond), sigma);
}

TrajBatch ddim_sample(const EpsModel& model, const TrajBatch& z_init, const VpSchedule& sched,
                      const BatchCondition& cond, int n_steps) {
    const auto steps = sampling_steps(sched, n_steps);
    TrajBatch x = z_init;
    for (std::size_t i = 0; i + 1 < steps.size(); ++i) {
        const double a_from = sched.alpha(steps[i]);
        const TrajBatch eps = model.eps(x, a_from, cond);
        require_finite(eps, "noise prediction at step " + std::to_string(steps[i]));
        x = ddim_transition(x, eps, a_from, sched.alpha(steps[i + 1]));
        require_finite(x, "sampler state at step " + std::to_string(steps[i + 1]));
    }
    return x;
}

TrajBatch inverse_ddim(const EpsModel& model, const TrajBatch& x0, const VpSchedule& sched,
                       const BatchCondition& cond, int n_steps) {
    const auto steps = sampling_steps(sched, n_steps);
    TrajBatch x = x0;
    for (std::size_t i = steps.size() - 1; i > 0; --i) {
        const double a_from = sched.alpha(steps[i]);
        const double a_to = sched.alpha(steps[i - 1]);
        // The clean state has no noise level; its first move uses the next one.
        const double a_eval = steps[i] == 0 ? a_to : a_from;
        const TrajBatch eps = model.eps(x, a_eval, cond);
        require_finite(eps, "noise prediction at step " + std::to_string(steps[i]));
        x = ddim_transition(x, eps, a_from, a_to);
        require_finite(x, "inversion state at step " + std::to_string(steps[i - 1]));
    }
    return x;
}

void EdmConfig::validate() const {
    if (!(sigma_data > 0.0)) throw InvalidArgument("EdmConfig: sigma_data must be positive");
    if (!(p_std > 0.0)) throw InvalidArgument("EdmConfig: p_std must be positive");
}

EdmCoefficients edm_coefficients(double sigma, double sigma_data) {
    if (!(sigma > 0.0)) {
        throw InvalidArgument("edm_coefficients: sigma must be positive");
    }
    const double s2 = sigma * sigma + sigma_data * sigma_data;
    return {1.0 / std::sqrt(s2), sigma_data * sigma_data / s2, sigma * sigma_data / std::sqrt(s2),
            0.25 * std::log(sigma)};
}

namespace {

/// Scales each trajectory's block of columns by its own factor.
TrajBatch scale_per_traj(const TrajBatch& x, const Eigen::VectorXd& f) {
    const auto b = f.size();
    const auto t = x.cols() / b;
    TrajBatch out(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < b; ++i) out.middleCols(i * t, t) = f(i) * x.middleCols(i * t, t);
    return out;
}

}  // namespace

TrajBatch edm_precondition(const RawNet& net, const TrajBatch& x, const Eigen::VectorXd& sigma,
                           const BatchCondition& cond, const EdmConfig& cfg) {
    const auto b = sigma.size();
    if (b == 0 || x.cols() % b != 0 || static_cast<std::size_t>(b) != cond.batch()) {
        throw InvalidArgument("edm_precondition: batch size mismatch");
    }
    Eigen::VectorXd c_in(b), c_skip(b), c_out(b), c_noise(b);
    for (Eigen::Index i = 0; i < b; ++i) {
        const auto c = edm_coefficients(sigma(i), cfg.sigma_data);
        c_in(i) = c.c_in;
        c_skip(i) = c.c_skip;
        c_out(i) = c.c_out;
        c_noise(i) = c.c_noise;
    }
    const TrajBatch f = net(scale_per_traj(x, c_in), c_noise, cond);
    return scale_per_traj(x, c_skip) + scale_per_traj(f, c_out);
}

Eigen::VectorXd sample_edm_sigmas(std::size_t batch, Rng& rng, const EdmConfig& cfg) {
    Eigen::VectorXd s(static_cast<Eigen::Index>(batch));
    for (auto& v : s) v = std::exp(cfg.p_mean + cfg.p_std * standard_normal(rng));
    return s;
}

double edm_loss(const Denoiser& d, const TrajBatch& x0, const BatchCondition& cond, Rng& rng,
                const EdmConfig& cfg) {
    const auto b = static_cast<Eigen::Index>(cond.batch());
    if (b == 0 || x0.cols() % b != 0) {
        throw InvalidArgument("edm_loss: batch size mismatch");
    }
    const Eigen::VectorXd sigma = sample_edm_sigmas(cond.batch(), rng, cfg);
    TrajBatch n(x0.rows(), x0.cols());
    for (Eigen::Index j = 0; j < n.cols(); ++j) {
        for (Eigen::Index i = 0; i < n.rows(); ++i) n(i, j) = standard_normal(rng);
    }
    const TrajBatch x = x0 + scale_per_traj(n, sigma);
    return (d.denoise(x, sigma, cond) - x0).squaredNorm() / static_cast<double>(b);
}

double sigma_from_alpha(double alpha_bar) {
    return std::sqrt((1.0 - alpha_bar) / alpha_bar);
}

double alpha_from_sigma(double sigma) {
    return 1.0 / (1.0 + sigma * sigma);
}

TrajBatch vp_to_ve(const TrajBatch& x_vp, double alpha_bar) {
    return x_vp / std::sqrt(alpha_bar);
}

TrajBatch ve_to_vp(const TrajBatch& x_ve, double alpha_bar) {
    return x_ve * std::sqrt(alpha_bar);
}

TrajBatch eps_from_denoised(const TrajBatch& x_ve, const TrajBatch& denoised, double sigma) {
    return (x_ve - denoised) / sigma;
}

TrajBatch denoised_from_eps(const TrajBatch& x_ve, const TrajBatch& eps, double sigma) {
    return x_ve - sigma * eps;
}

TrajBatch heun_sample(const Denoiser& d, const TrajBatch& z_init, const VpSchedule& sched,
                      const BatchCondition& cond, int n_steps, bool second_order) {
    const auto steps = sampling_steps(sched, n_steps);
    const auto b = static_cast<Eigen::Index>(cond.batch());
    auto slope = [&](const TrajBatch& x, double sigma) {
        return eps_from_denoised(x, d.denoise(x, Eigen::VectorXd::Constant(b, sigma), cond), sigma);
    };
    TrajBatch x = vp_to_ve(z_init, sched.alpha(steps.front()));
    for (std::size_t i = 0; i + 1 < steps.size(); ++i) {
        const double s_from = sigma_from_alpha(sched.alpha(steps[i]));
        const double s_to = sigma_from_alpha(sched.alpha(steps[i + 1]));
        const TrajBatch d1 = slope(x, s_from);
        TrajBatch next = x + (s_to - s_from) * d1;
        if (second_order && s_to > 0.0) {
            next = x + (s_to - s_from) * 0.5 * (d1 + slope(next, s_to));
        }
        x = std::move(next);
        require_finite(x, "ODE state at step " + std::to_string(steps[i + 1]));
    }
    return x;
}

TrajBatch map_chunks(const TrajBatch& x, const BatchCondition& cond, int traj_len, std::size_t chunk,
                     const std::function<TrajBatch(const TrajBatch&, const BatchCondition&)>& fn) {
    const std::size_t b = cond.batch();
    if (chunk == 0 || traj_len <= 0 || x.cols() != static_cast<Eigen::Index>(b) * traj_len) {
        throw InvalidArgument("map_chunks: batch shape mismatch");
    }
    const std::size_t n_chunks = (b + chunk - 1) / chunk;
    TrajBatch out(x.rows(), x.cols());
    parallel_for(n_chunks, [&](std::size_t i) {
        const std::size_t lo = i * chunk;
        const std::size_t n = std::min(chunk, b - lo);
        BatchCondition c;
        c.start.assign(cond.start.begin() + static_cast<std::ptrdiff_t>(lo),
                       cond.start.begin() + static_cast<std::ptrdiff_t>(lo + n));
        c.is_null.assign(n, 0);
        for (std::size_t j = 0; j < n && lo + j < cond.is_null.size(); ++j) c.is_null[j] = cond.is_null[lo + j];
        const auto cols = static_cast<Eigen::Index>(n) * traj_len;
        const auto first = static_cast<Eigen::Index>(lo) * traj_len;
        const TrajBatch y = fn(x.middleCols(first, cols), c);
        if (y.rows() != x.rows() || y.cols() != cols) {
            throw InvalidArgument("map_chunks: function changed the slice shape");
        }
        out.middleCols(first, cols) = y;
    });
    return out;
}

TrajBatch to_batch(const std::vector<Trajectory>& trajs, int grid_side, const DataAffine& affine) {
    if (trajs.empty()) {
        throw InvalidArgument("to_batch: no trajectories");
    }
    const auto t = static_cast<Eigen::Index>(trajs.front().length());
    TrajBatch x(2, static_cast<Eigen::Index>(trajs.size()) * t);
    for (std::size_t b = 0; b < trajs.size(); ++b) {
        if (static_cast<Eigen::Index>(trajs[b].length()) != t) {
            throw InvalidArgument("to_batch: trajectories differ in length");
        }
        for (Eigen::Index s = 0; s < t; ++s) {
            const Coord c = affine.to_model(loc_to_coord(grid_side, trajs[b].locs[static_cast<std::size_t>(s)]));
            const auto col = static_cast<Eigen::Index>(b) * t + s;
            x(0, col) = c.x;
            x(1, col) = c.y;
        }
    }
    return x;
}

std::vector<Trajectory> from_batch(const TrajBatch& x, int traj_len, int grid_side, const DataAffine& affine) {
    if (x.rows() != 2 || traj_len <= 0 || x.cols() % traj_len != 0) {
        throw InvalidArgument("from_batch: shape does not match trajectory length");
    }
    require_finite(x, "generated trajectories");
    const auto n = x.cols() / traj_len;
    std::vector<Trajectory> out(static_cast<std::size_t>(n));
    for (Eigen::Index b = 0; b < n; ++b) {
        auto& locs = out[static_cast<std::size_t>(b)].locs;
        locs.resize(static_cast<std::size_t>(traj_len));
        for (int s = 0; s < traj_len; ++s) {
            const auto col = b * traj_len + s;
            locs[static_cast<std::size_t>(s)] = coord_to_loc(grid_side, affine.to_lattice({x(0, col), x(1, col)}));
        }
    }
    return out;
}

}  // namespace mobgen
