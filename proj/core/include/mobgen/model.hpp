#pragma once

#include <vector>

#include "mobgen/diffusion.hpp"
#include "mobgen/network.hpp"

namespace mobgen {

enum class Precision { f32, f64 };

/// Classifier-free guidance: eps_null + w * (eps_cond - eps_null).
TrajBatch guided_eps(const TrajBatch& eps_cond, const TrajBatch& eps_null, double w);

/// The preconditioned network D(x; sigma, cond) with guidance. Inference
/// and training use `precision` for the network arithmetic.
class DenoiserModel final : public Denoiser {
public:
    DenoiserModel(DenoiserConfig cfg, ParamStore params, EdmConfig edm = {}, Precision precision = Precision::f32);
    ~DenoiserModel() override;
    DenoiserModel(DenoiserModel&&) noexcept;

    const DenoiserConfig& config() const noexcept { return cfg_; }
    const EdmConfig& edm() const noexcept { return edm_; }
    const ParamStore& params() const noexcept { return params_; }
    Precision precision() const noexcept { return precision_; }

    /// Replaces the parameters (same layout) and refreshes the compute copy.
    void set_params(const ParamStore& p);
    /// Refreshes the compute copy after in-place edits of `mutable_values()`.
    std::vector<double>& mutable_values() noexcept { return params_.values; }
    void sync();

    double guidance_scale() const noexcept { return guidance_; }
    void set_guidance_scale(double w) { guidance_ = w; }

    /// Guided D; trajectories whose condition is already null are unaffected.
    TrajBatch denoise(const TrajBatch& x, const Eigen::VectorXd& sigma, const BatchCondition& cond) const override;
    /// D under the condition exactly as given.
    TrajBatch denoise_unguided(const TrajBatch& x, const Eigen::VectorXd& sigma, const BatchCondition& cond) const;
    /// Raw network output F for the preconditioned input.
    TrajBatch raw(const TrajBatch& x_in, const Eigen::VectorXd& c_noise, const BatchCondition& cond) const;

    /// Per-trajectory squared error ||D(x0 + sigma*n) - x0||^2 averaged over
    /// the batch, optionally scaled per trajectory by `weights`. When `grad`
    /// is given it receives the gradient (same layout as the parameters,
    /// overwritten). `denominator` replaces the batch size in the average.
    double loss(const TrajBatch& x0, const BatchCondition& cond, const Eigen::VectorXd& sigma,
                const TrajBatch& noise, std::vector<double>* grad = nullptr,
                const Eigen::VectorXd* weights = nullptr, double denominator = 0.0) const;

private:
    struct Impl;

    DenoiserConfig cfg_;
    ParamStore params_;
    EdmConfig edm_;
    Precision precision_;
    double guidance_;
    std::unique_ptr<Impl> impl_;
};

}  // namespace mobgen
