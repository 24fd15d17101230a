#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mobgen/types.hpp"

namespace mobgen {

struct DenoiserConfig {
    int traj_len = kSlotsPerDay;
    int channels = 2;
    int hidden_dim = 64;
    std::vector<int> channel_mult{1, 2, 2, 2};
    int blocks_per_stage = 2;
    int freq_bands = 64;
    int emb_mult = 4;
    int channels_per_head = 64;  // recorded only; attention is single-head
    double cond_drop_prob = 0.1;
    double guidance_scale = 3.0;

    int emb_dim() const { return emb_mult * hidden_dim; }
    void validate() const;
};

nlohmann::json to_json(const DenoiserConfig& cfg);
DenoiserConfig denoiser_config_from_json(const nlohmann::json& j);

struct ParamSpec {
    enum class Init { fan_in, zeros, ones };

    std::string name;
    int rows = 0;
    int cols = 0;
    Init init = Init::fan_in;
    int fan_in = 1;
    std::size_t offset = 0;

    std::size_t size() const noexcept { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
};

/// Named flat parameter arrays stored back to back. Values are kept exactly
/// representable as 32-bit floats so that checkpoints round-trip bitwise.
struct ParamStore {
    std::vector<ParamSpec> specs;
    std::vector<double> values;
    std::uint64_t init_seed = 0;

    std::size_t count() const noexcept { return values.size(); }
    const ParamSpec& spec(const std::string& name) const;
    std::span<double> view(const std::string& name);
    std::span<const double> view(const std::string& name) const;
    void round_to_float();
    bool all_finite() const;
};

/// Parameter-free activation caches of one forward pass.
template <class S>
class Tape {
public:
    Tape();
    ~Tape();
    Tape(Tape&&) noexcept;
    Tape& operator=(Tape&&) noexcept;

    struct Impl;
    std::unique_ptr<Impl> impl;
};

/// One-dimensional encoder-decoder over the time axis. Activations are
/// channel x (batch * length) matrices, column b*L + t.
template <class S>
class UNet1D {
public:
    using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
    using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

    explicit UNet1D(const DenoiserConfig& cfg);
    ~UNet1D();
    UNet1D(UNet1D&&) noexcept;

    const DenoiserConfig& config() const noexcept;
    const std::vector<ParamSpec>& layout() const noexcept;
    std::size_t param_count() const noexcept;

    /// Raw output F for input `x` (channels x B*T), noise labels `c_noise`
    /// (length B), start points `start` (2 x B) and null flags. `params`
    /// follows `layout()`. When `tape` is given the caches for backward are kept.
    Mat forward(const S* params, const Mat& x, const Vec& c_noise, const Mat& start,
                const std::vector<std::uint8_t>& is_null, Tape<S>* tape = nullptr) const;

    /// Accumulates d(loss)/d(params) into `grads` given d(loss)/d(output).
    void backward(const S* params, const Tape<S>& tape, const Mat& d_out, S* grads) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

extern template class UNet1D<float>;
extern template class UNet1D<double>;
extern template class Tape<float>;
extern template class Tape<double>;

/// Fan-in scaled Gaussian weights, unit norm gains, zero biases; the output
/// convolution and attention projection start at zero.
ParamStore init_params(const DenoiserConfig& cfg, std::uint64_t seed);

/// Fills every parameter (including zero-initialized ones) with fan-in scaled
/// noise. Used by derivative checks that need a non-degenerate network.
void randomize_params(ParamStore& p, std::uint64_t seed, double scale = 1.0);

}  // namespace mobgen
