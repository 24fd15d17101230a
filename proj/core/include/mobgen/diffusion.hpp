#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mobgen/rng.hpp"
#include "mobgen/types.hpp"

namespace mobgen {

/// Batched continuous trajectories: a 2 x (B*T) matrix, column b*T + t holding
/// the model-unit coordinate of trajectory b in slot t.
using TrajBatch = Eigen::MatrixXd;

/// Per-trajectory conditioning shared by every noise level of one sampling run.
struct BatchCondition {
    std::vector<Coord> start;          // model units
    std::vector<std::uint8_t> is_null; // 1 replaces the start point by the null embedding

    std::size_t batch() const noexcept { return start.size(); }
    static BatchCondition null_batch(std::size_t b);
};

/// Variance-preserving noise schedule with steps k = 1..K. Step 0 is the
/// clean data (alpha = 1).
struct VpSchedule {
    int K = 0;
    std::vector<double> beta;
    std::vector<double> alpha_bar;
    double spacing = 2.0;  // power of the sampling-step grid

    /// Cumulative signal fraction at step k in [0, K].
    double alpha(int k) const;
    std::string hash() const;
};

VpSchedule make_vp_schedule(int K, double beta_min, double beta_max);
/// Schedule from explicit betas (strictly increasing, each in (0, 1)).
VpSchedule make_vp_schedule(std::vector<double> beta);

/// Descending steps K = k_n > ... > k_0 = 0 with k_i = round(K * (i / n)^power),
/// raised where needed to keep the steps distinct. Power 1 is the uniform grid.
std::vector<int> sampling_steps(int K, int n_steps, double power = 1.0);
std::vector<int> sampling_steps(const VpSchedule& sched, int n_steps);

TrajBatch forward_diffuse(const TrajBatch& x0, int k, const TrajBatch& z, const VpSchedule& sched);

/// Deterministic move between arbitrary signal levels given the predicted
/// noise; `sigma` adds fresh noise scaled by `noise` when positive.
TrajBatch ddim_transition(const TrajBatch& x, const TrajBatch& eps, double alpha_from, double alpha_to,
                          double sigma = 0.0, const TrajBatch* noise = nullptr);

/// Standard deviation of the injected noise of the ancestral variant between
/// two signal levels.
double ancestral_sigma(double alpha_from, double alpha_to);

/// One step k -> k-1. With `stochastic` the ancestral sigma and a fresh
/// Gaussian from `rng` are used.
TrajBatch ddim_step(const TrajBatch& x_k, const TrajBatch& eps_hat, int k, const VpSchedule& sched,
                    bool stochastic = false, Rng* rng = nullptr);

/// Noise prediction at a given signal level, operating on VP-scaled states.
class EpsModel {
public:
    virtual ~EpsModel() = default;
    virtual TrajBatch eps(const TrajBatch& x, double alpha_bar, const BatchCondition& cond) const = 0;
};

/// Denoiser in the variance-exploding parameterization: input x0 + sigma * n,
/// output an estimate of x0. `sigma` holds one level per trajectory.
class Denoiser {
public:
    virtual ~Denoiser() = default;
    virtual TrajBatch denoise(const TrajBatch& x, const Eigen::VectorXd& sigma, const BatchCondition& cond) const = 0;
};

/// Serves a Denoiser through the EpsModel interface.
class DenoiserEps final : public EpsModel {
public:
    explicit DenoiserEps(const Denoiser& d) : d_(d) {}
    TrajBatch eps(const TrajBatch& x, double alpha_bar, const BatchCondition& cond) const override;

private:
    const Denoiser& d_;
};

/// Deterministic sampler from z_init at step K down to step 0 over
/// `sampling_steps(K, n_steps)`.
TrajBatch ddim_sample(const EpsModel& model, const TrajBatch& z_init, const VpSchedule& sched,
                      const BatchCondition& cond, int n_steps);

/// First-order inversion from data to step K. Each move k -> k' predicts the
/// noise at the current state and level; the move out of step 0 uses the
/// level of its target.
TrajBatch inverse_ddim(const EpsModel& model, const TrajBatch& x0, const VpSchedule& sched,
                       const BatchCondition& cond, int n_steps);

struct EdmConfig {
    double sigma_data = kSigmaData;
    double p_mean = -1.2;
    double p_std = 1.2;

    void validate() const;
};

struct EdmCoefficients {
    double c_in;
    double c_skip;
    double c_out;
    double c_noise;
};

EdmCoefficients edm_coefficients(double sigma, double sigma_data = kSigmaData);

/// Raw network call on the c_in-scaled input and per-trajectory c_noise.
using RawNet = std::function<TrajBatch(const TrajBatch& x_in, const Eigen::VectorXd& c_noise,
                                       const BatchCondition& cond)>;

/// D = c_skip * x + c_out * F(c_in * x; c_noise), per trajectory.
TrajBatch edm_precondition(const RawNet& net, const TrajBatch& x, const Eigen::VectorXd& sigma,
                           const BatchCondition& cond, const EdmConfig& cfg = {});

/// Per-trajectory squared error ||D(x0 + n) - x0||^2 averaged over the batch,
/// with ln sigma ~ N(p_mean, p_std^2) and n ~ N(0, sigma^2 I).
double edm_loss(const Denoiser& d, const TrajBatch& x0, const BatchCondition& cond, Rng& rng,
                const EdmConfig& cfg = {});

/// Noise levels for one training batch, drawn from the log-normal law.
Eigen::VectorXd sample_edm_sigmas(std::size_t batch, Rng& rng, const EdmConfig& cfg = {});

// Bridge between the VP parameterization (x_vp = sqrt(a) x0 + sqrt(1-a) eps)
// and the VE one (x_ve = x0 + sigma eps): x_ve = x_vp / sqrt(a) with
// sigma^2 = (1 - a) / a.
double sigma_from_alpha(double alpha_bar);
double alpha_from_sigma(double sigma);
TrajBatch vp_to_ve(const TrajBatch& x_vp, double alpha_bar);
TrajBatch ve_to_vp(const TrajBatch& x_ve, double alpha_bar);
TrajBatch eps_from_denoised(const TrajBatch& x_ve, const TrajBatch& denoised, double sigma);
TrajBatch denoised_from_eps(const TrajBatch& x_ve, const TrajBatch& eps, double sigma);

/// Heun (or Euler) integration of the probability-flow ODE in the VE form over
/// the levels of `sampling_steps`, starting from the VP latent `z_init`.
TrajBatch heun_sample(const Denoiser& d, const TrajBatch& z_init, const VpSchedule& sched,
                      const BatchCondition& cond, int n_steps, bool second_order = true);

/// Throws NumericError naming `where` if any entry is not finite.
void require_finite(const TrajBatch& x, const std::string& where);

/// Applies `fn` to consecutive slices of at most `chunk` trajectories and
/// concatenates the results. Slices run through parallel_for and each writes
/// its own output columns, so the result does not depend on the thread count.
TrajBatch map_chunks(const TrajBatch& x, const BatchCondition& cond, int traj_len, std::size_t chunk,
                     const std::function<TrajBatch(const TrajBatch&, const BatchCondition&)>& fn);

/// Packs trajectories into a batch through the dataset affine, and back.
TrajBatch to_batch(const std::vector<Trajectory>& trajs, int grid_side, const DataAffine& affine);
std::vector<Trajectory> from_batch(const TrajBatch& x, int traj_len, int grid_side, const DataAffine& affine);

}  // namespace mobgen
