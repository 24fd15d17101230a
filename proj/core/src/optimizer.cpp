#include "mobgen/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mobgen/error.hpp"

namespace mobgen {

std::string to_string(OptimizerKind k) {
    return k == OptimizerKind::sgd ? "sgd" : "adamw";
}

OptimizerKind optimizer_kind_from_string(const std::string& s) {
    if (s == "sgd") return OptimizerKind::sgd;
    if (s == "adamw") return OptimizerKind::adamw;
    throw ConfigError("optimizer.kind: expected 'sgd' or 'adamw', got '" + s + "'");
}

void OptimizerConfig::validate() const {
    if (!(lr > 0.0)) throw ConfigError("optimizer.lr must be positive");
    if (!(weight_decay >= 0.0)) throw ConfigError("optimizer.weight_decay must be non-negative");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("optimizer.momentum must lie in [0, 1)");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ConfigError("optimizer.beta1/beta2 must lie in [0, 1)");
    }
    if (!(eps > 0.0)) throw ConfigError("optimizer.eps must be positive");
    if (!(grad_clip >= 0.0)) throw ConfigError("optimizer.grad_clip must be non-negative");
    if (!(pct_start > 0.0 && pct_start < 1.0)) throw ConfigError("optimizer.pct_start must lie in (0, 1)");
    if (!(div_factor >= 1.0) || !(final_div_factor >= 1.0)) {
        throw ConfigError("optimizer.div_factor and final_div_factor must be at least 1");
    }
}

nlohmann::json to_json(const OptimizerConfig& c) {
    return {{"kind", to_string(c.kind)},
            {"lr", c.lr},
            {"weight_decay", c.weight_decay},
            {"momentum", c.momentum},
            {"beta1", c.beta1},
            {"beta2", c.beta2},
            {"eps", c.eps},
            {"grad_clip", c.grad_clip},
            {"pct_start", c.pct_start},
            {"div_factor", c.div_factor},
            {"final_div_factor", c.final_div_factor}};
}

OptimizerConfig optimizer_config_from_json(const nlohmann::json& j) {
    OptimizerConfig c;
    if (j.contains("kind")) c.kind = optimizer_kind_from_string(j.at("kind").get<std::string>());
    c.lr = j.value("lr", c.lr);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.momentum = j.value("momentum", c.momentum);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.eps = j.value("eps", c.eps);
    c.grad_clip = j.value("grad_clip", c.grad_clip);
    c.pct_start = j.value("pct_start", c.pct_start);
    c.div_factor = j.value("div_factor", c.div_factor);
    c.final_div_factor = j.value("final_div_factor", c.final_div_factor);
    return c;
}

double one_cycle_lr(long step, long total_steps, const OptimizerConfig& c) {
    const double initial = c.lr / c.div_factor;
    const double final_lr = initial / c.final_div_factor;
    const double warm_end = std::max(1.0, c.pct_start * static_cast<double>(total_steps) - 1.0);
    const double last = std::max(warm_end + 1.0, static_cast<double>(total_steps) - 1.0);
    const double s = std::clamp(static_cast<double>(step), 0.0, last);
    auto cosine = [](double from, double to, double frac) {
        return to + (from - to) * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
    };
    if (s <= warm_end) return cosine(initial, c.lr, s / warm_end);
    return cosine(c.lr, final_lr, (s - warm_end) / (last - warm_end));
}

Optimizer::Optimizer(OptimizerConfig cfg, std::size_t n_params, long total_steps)
    : cfg_(cfg), total_(std::max(1L, total_steps)), m_(n_params, 0.0) {
    cfg_.validate();
    if (cfg_.kind == OptimizerKind::adamw) v_.assign(n_params, 0.0);
}

void Optimizer::step(std::vector<double>& params, const std::vector<double>& grad) {
    if (params.size() != m_.size() || grad.size() != m_.size()) {
        throw InvalidArgument("Optimizer::step: size mismatch");
    }
    double norm2 = 0.0;
    for (double g : grad) norm2 += g * g;
    last_norm_ = std::sqrt(norm2);
    if (!std::isfinite(last_norm_)) {
        throw NumericError("Optimizer::step: non-finite gradient");
    }
    const double clip = cfg_.grad_clip > 0.0 && last_norm_ > cfg_.grad_clip ? cfg_.grad_clip / last_norm_ : 1.0;
    const double lr = current_lr();
    ++step_;
    if (cfg_.kind == OptimizerKind::sgd) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double g = clip * grad[i] + cfg_.weight_decay * params[i];
            m_[i] = cfg_.momentum * m_[i] + g;
            params[i] -= lr * m_[i];
        }
        return;
    }
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = clip * grad[i];
        m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
        v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g * g;
        params[i] -= lr * cfg_.weight_decay * params[i];
        params[i] -= lr * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + cfg_.eps);
    }
}

}  // namespace mobgen
