#include "mobgen/model.hpp"

#include <cmath>

#include "mobgen/error.hpp"

namespace mobgen {

TrajBatch guided_eps(const TrajBatch& eps_cond, const TrajBatch& eps_null, double w) {
    if (eps_cond.rows() != eps_null.rows() || eps_cond.cols() != eps_null.cols()) {
        throw InvalidArgument("guided_eps: conditional and null predictions differ in shape");
    }
    return eps_null + w * (eps_cond - eps_null);
}

struct DenoiserModel::Impl {
    UNet1D<float> net32;
    UNet1D<double> net64;
    std::vector<float> values32;

    explicit Impl(const DenoiserConfig& cfg) : net32(cfg), net64(cfg) {}
};

namespace {

/// Scales each trajectory's columns by its own factor.
TrajBatch per_traj(const TrajBatch& x, const Eigen::VectorXd& f) {
    const auto t = x.cols() / f.size();
    TrajBatch out(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < f.size(); ++i) out.middleCols(i * t, t) = f(i) * x.middleCols(i * t, t);
    return out;
}

struct Coefficients {
    Eigen::VectorXd c_in, c_skip, c_out, c_noise;
};

Coefficients coefficients(const Eigen::VectorXd& sigma, const EdmConfig& edm) {
    Coefficients c;
    const auto b = sigma.size();
    c.c_in.resize(b);
    c.c_skip.resize(b);
    c.c_out.resize(b);
    c.c_noise.resize(b);
    for (Eigen::Index i = 0; i < b; ++i) {
        const auto e = edm_coefficients(sigma(i), edm.sigma_data);
        c.c_in(i) = e.c_in;
        c.c_skip(i) = e.c_skip;
        c.c_out(i) = e.c_out;
        c.c_noise(i) = e.c_noise;
    }
    return c;
}

template <class S>
TrajBatch run_forward(const UNet1D<S>& net, const S* params, const TrajBatch& x_in, const Eigen::VectorXd& c_noise,
                      const BatchCondition& cond, Tape<S>* tape) {
    using Mat = typename UNet1D<S>::Mat;
    const auto b = static_cast<Eigen::Index>(cond.batch());
    Mat start(2, b);
    for (Eigen::Index i = 0; i < b; ++i) {
        start(0, i) = static_cast<S>(cond.start[static_cast<std::size_t>(i)].x);
        start(1, i) = static_cast<S>(cond.start[static_cast<std::size_t>(i)].y);
    }
    std::vector<std::uint8_t> is_null = cond.is_null;
    is_null.resize(cond.batch(), 0);
    const Mat out = net.forward(params, x_in.cast<S>(), c_noise.cast<S>(), start, is_null, tape);
    return out.template cast<double>();
}

}  // namespace

DenoiserModel::DenoiserModel(DenoiserConfig cfg, ParamStore params, EdmConfig edm, Precision precision)
    : cfg_(std::move(cfg)),
      params_(std::move(params)),
      edm_(edm),
      precision_(precision),
      guidance_(cfg_.guidance_scale),
      impl_(std::make_unique<Impl>(cfg_)) {
    edm_.validate();
    if (params_.count() != impl_->net64.param_count()) {
        throw InvalidArgument("DenoiserModel: parameter count " + std::to_string(params_.count()) +
                              " does not match the configuration (" +
                              std::to_string(impl_->net64.param_count()) + ")");
    }
    sync();
}

DenoiserModel::~DenoiserModel() = default;
DenoiserModel::DenoiserModel(DenoiserModel&&) noexcept = default;

void DenoiserModel::set_params(const ParamStore& p) {
    if (p.count() != params_.count()) {
        throw InvalidArgument("DenoiserModel::set_params: parameter count mismatch");
    }
    params_ = p;
    sync();
}

void DenoiserModel::sync() {
    impl_->values32.assign(params_.values.begin(), params_.values.end());
}

TrajBatch DenoiserModel::raw(const TrajBatch& x_in, const Eigen::VectorXd& c_noise, const BatchCondition& cond) const {
    if (precision_ == Precision::f32) {
        return run_forward<float>(impl_->net32, impl_->values32.data(), x_in, c_noise, cond, nullptr);
    }
    return run_forward<double>(impl_->net64, params_.values.data(), x_in, c_noise, cond, nullptr);
}

TrajBatch DenoiserModel::denoise_unguided(const TrajBatch& x, const Eigen::VectorXd& sigma,
                                          const BatchCondition& cond) const {
    if (sigma.size() != static_cast<Eigen::Index>(cond.batch()) || x.cols() != sigma.size() * cfg_.traj_len) {
        throw InvalidArgument("DenoiserModel: batch shape mismatch");
    }
    const auto c = coefficients(sigma, edm_);
    const TrajBatch f = raw(per_traj(x, c.c_in), c.c_noise, cond);
    return per_traj(x, c.c_skip) + per_traj(f, c.c_out);
}

TrajBatch DenoiserModel::denoise(const TrajBatch& x, const Eigen::VectorXd& sigma, const BatchCondition& cond) const {
    const auto b = cond.batch();
    bool any_cond = false;
    for (std::size_t i = 0; i < b; ++i) any_cond = any_cond || !(i < cond.is_null.size() && cond.is_null[i]);
    if (guidance_ == 1.0 || !any_cond) return denoise_unguided(x, sigma, cond);
    // Conditional and unconditional passes share one batched evaluation.
    const auto n = static_cast<Eigen::Index>(b);
    TrajBatch x2(x.rows(), 2 * x.cols());
    x2 << x, x;
    Eigen::VectorXd s2(2 * n);
    s2 << sigma, sigma;
    BatchCondition c2 = cond;
    c2.is_null.resize(b, 0);
    c2.start.insert(c2.start.end(), cond.start.begin(), cond.start.end());
    c2.is_null.insert(c2.is_null.end(), b, 1);
    const TrajBatch d = denoise_unguided(x2, s2, c2);
    return guided_eps(d.leftCols(x.cols()), d.rightCols(x.cols()), guidance_);
}

double DenoiserModel::loss(const TrajBatch& x0, const BatchCondition& cond, const Eigen::VectorXd& sigma,
                           const TrajBatch& noise, std::vector<double>* grad, const Eigen::VectorXd* weights,
                           double denominator) const {
    const auto b = denominator > 0.0 ? denominator : static_cast<double>(cond.batch());
    if (weights && weights->size() != sigma.size()) {
        throw InvalidArgument("DenoiserModel::loss: weight count differs from batch size");
    }
    if (sigma.size() != static_cast<Eigen::Index>(cond.batch()) || x0.cols() != sigma.size() * cfg_.traj_len ||
        noise.rows() != x0.rows() || noise.cols() != x0.cols()) {
        throw InvalidArgument("DenoiserModel::loss: batch shape mismatch");
    }
    const auto c = coefficients(sigma, edm_);
    const TrajBatch x = x0 + per_traj(noise, sigma);
    const TrajBatch x_in = per_traj(x, c.c_in);

    auto run = [&](auto& net, const auto* values, auto tag) {
        using S = decltype(tag);
        Tape<S> tape;
        const TrajBatch f = run_forward<S>(net, values, x_in, c.c_noise, cond, grad ? &tape : nullptr);
        const TrajBatch resid = per_traj(x, c.c_skip) + per_traj(f, c.c_out) - x0;
        const TrajBatch wresid = weights ? per_traj(resid, *weights) : resid;
        const double value = resid.cwiseProduct(wresid).sum() / b;
        if (grad) {
            using Mat = typename UNet1D<S>::Mat;
            const Mat d_f = (per_traj(wresid, c.c_out) * (2.0 / b)).cast<S>();
            std::vector<S> g(net.param_count(), S(0));
            net.backward(values, tape, d_f, g.data());
            grad->assign(g.begin(), g.end());
            for (std::size_t i = 0; i < grad->size(); ++i) {
                if (!std::isfinite((*grad)[i])) {
                    for (const auto& s : params_.specs) {
                        if (i >= s.offset && i < s.offset + s.size()) {
                            throw NumericError("non-finite gradient in layer '" + s.name + "'");
                        }
                    }
                }
            }
        }
        return value;
    };
    if (precision_ == Precision::f32) return run(impl_->net32, impl_->values32.data(), float{});
    return run(impl_->net64, params_.values.data(), double{});
}

}  // namespace mobgen
