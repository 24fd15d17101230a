#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace mobgen {

enum class OptimizerKind { sgd, adamw };

std::string to_string(OptimizerKind k);
OptimizerKind optimizer_kind_from_string(const std::string& s);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::sgd;
    double lr = 5e-4;            // one-cycle peak
    double weight_decay = 0.03;
    double momentum = 0.9;       // sgd
    double beta1 = 0.9;          // adamw
    double beta2 = 0.999;
    double eps = 1e-8;
    double grad_clip = 0.0;      // global-norm clip; 0 disables
    double pct_start = 0.3;
    double div_factor = 25.0;
    double final_div_factor = 1e4;

    void validate() const;
};

nlohmann::json to_json(const OptimizerConfig& c);
OptimizerConfig optimizer_config_from_json(const nlohmann::json& j);

/// One-cycle policy: cosine warm-up from peak/div to peak over the first
/// pct_start of the steps, then cosine decay to peak/(div*final_div).
double one_cycle_lr(long step, long total_steps, const OptimizerConfig& c);

class Optimizer {
public:
    Optimizer(OptimizerConfig cfg, std::size_t n_params, long total_steps);

    /// Applies one update in place and advances the schedule.
    void step(std::vector<double>& params, const std::vector<double>& grad);

    double current_lr() const { return one_cycle_lr(step_, total_, cfg_); }
    long steps_taken() const noexcept { return step_; }
    /// Global gradient norm seen by the last step (before clipping).
    double last_grad_norm() const noexcept { return last_norm_; }

private:
    OptimizerConfig cfg_;
    long total_;
    long step_ = 0;
    double last_norm_ = 0.0;
    std::vector<double> m_;
    std::vector<double> v_;
};

}  // namespace mobgen
