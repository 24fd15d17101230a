#include "mobgen/network.hpp"

#include <algorithm>
#include <cmath>

#include "layers.hpp"
#include "mobgen/error.hpp"
#include "mobgen/rng.hpp"

namespace mobgen {

using nn::CMap;
using nn::GMap;
using Eigen::Index;

void DenoiserConfig::validate() const {
    if (channels < 1) throw InvalidArgument("denoiser.channels must be positive");
    if (hidden_dim < 4 || hidden_dim % 4 != 0) {
        throw InvalidArgument("denoiser.hidden_dim must be a positive multiple of 4");
    }
    if (channel_mult.empty()) throw InvalidArgument("denoiser.channel_mult must not be empty");
    for (int m : channel_mult) {
        if (m < 1) throw InvalidArgument("denoiser.channel_mult entries must be positive");
    }
    const int factor = 1 << (channel_mult.size() - 1);
    if (traj_len < 1 || traj_len % factor != 0) {
        throw InvalidArgument("denoiser.traj_len must be divisible by 2^(stages-1) = " + std::to_string(factor));
    }
    if (blocks_per_stage < 1) throw InvalidArgument("denoiser.blocks_per_stage must be positive");
    if (freq_bands < 4 || freq_bands % 2 != 0) {
        throw InvalidArgument("denoiser.freq_bands must be even and at least 4");
    }
    if (emb_mult < 1) throw InvalidArgument("denoiser.emb_mult must be positive");
    if (!(cond_drop_prob >= 0.0 && cond_drop_prob < 1.0)) {
        throw InvalidArgument("denoiser.cond_drop_prob must lie in [0, 1)");
    }
    if (!std::isfinite(guidance_scale)) throw InvalidArgument("denoiser.guidance_scale must be finite");
}

nlohmann::json to_json(const DenoiserConfig& c) {
    return {{"traj_len", c.traj_len},
            {"channels", c.channels},
            {"hidden_dim", c.hidden_dim},
            {"channel_mult", c.channel_mult},
            {"blocks_per_stage", c.blocks_per_stage},
            {"freq_bands", c.freq_bands},
            {"emb_mult", c.emb_mult},
            {"channels_per_head", c.channels_per_head},
            {"cond_drop_prob", c.cond_drop_prob},
            {"guidance_scale", c.guidance_scale}};
}

DenoiserConfig denoiser_config_from_json(const nlohmann::json& j) {
    DenoiserConfig c;
    c.traj_len = j.value("traj_len", c.traj_len);
    c.channels = j.value("channels", c.channels);
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.channel_mult = j.value("channel_mult", c.channel_mult);
    c.blocks_per_stage = j.value("blocks_per_stage", c.blocks_per_stage);
    c.freq_bands = j.value("freq_bands", c.freq_bands);
    c.emb_mult = j.value("emb_mult", c.emb_mult);
    c.channels_per_head = j.value("channels_per_head", c.channels_per_head);
    c.cond_drop_prob = j.value("cond_drop_prob", c.cond_drop_prob);
    c.guidance_scale = j.value("guidance_scale", c.guidance_scale);
    return c;
}

const ParamSpec& ParamStore::spec(const std::string& name) const {
    for (const auto& s : specs) {
        if (s.name == name) return s;
    }
    throw InvalidArgument("no parameter named '" + name + "'");
}

std::span<double> ParamStore::view(const std::string& name) {
    const auto& s = spec(name);
    return {values.data() + s.offset, s.size()};
}

std::span<const double> ParamStore::view(const std::string& name) const {
    const auto& s = spec(name);
    return {values.data() + s.offset, s.size()};
}

void ParamStore::round_to_float() {
    for (auto& v : values) v = static_cast<double>(static_cast<float>(v));
}

bool ParamStore::all_finite() const {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

namespace {

int group_count(int channels) {
    int g = std::min(32, std::max(1, channels / 4));
    while (channels % g != 0) --g;
    return g;
}

class Registry {
public:
    explicit Registry(std::vector<ParamSpec>& specs) : specs_(specs) {}

    int add(const std::string& name, int rows, int cols, ParamSpec::Init init, int fan_in = 1) {
        ParamSpec s;
        s.name = name;
        s.rows = rows;
        s.cols = cols;
        s.init = init;
        s.fan_in = fan_in;
        s.offset = specs_.empty() ? 0 : specs_.back().offset + specs_.back().size();
        specs_.push_back(s);
        return static_cast<int>(specs_.size()) - 1;
    }

private:
    std::vector<ParamSpec>& specs_;
};

struct Conv {
    int w = -1, b = -1;
    int cin = 0, cout = 0, k = 1;

    static Conv make(Registry& r, const std::string& name, int cin, int cout, int k, bool zero = false) {
        Conv c;
        c.cin = cin;
        c.cout = cout;
        c.k = k;
        c.w = r.add(name + ".weight", cout, k * cin, zero ? ParamSpec::Init::zeros : ParamSpec::Init::fan_in, k * cin);
        c.b = r.add(name + ".bias", cout, 1, ParamSpec::Init::zeros);
        return c;
    }
};

struct Norm {
    int g = -1, b = -1;
    int groups = 1;

    static Norm make(Registry& r, const std::string& name, int channels) {
        Norm n;
        n.groups = group_count(channels);
        n.g = r.add(name + ".gain", channels, 1, ParamSpec::Init::ones);
        n.b = r.add(name + ".bias", channels, 1, ParamSpec::Init::zeros);
        return n;
    }
};

struct Linear {
    int w = -1, b = -1;

    static Linear make(Registry& r, const std::string& name, int in, int out) {
        Linear l;
        l.w = r.add(name + ".weight", out, in, ParamSpec::Init::fan_in, in);
        l.b = r.add(name + ".bias", out, 1, ParamSpec::Init::zeros);
        return l;
    }
};

struct Res {
    Norm n1;
    Conv c1;
    Linear emb;
    Norm n2;
    Conv c2;
    bool has_skip = false;
    Conv skip;
};

struct Attn {
    Norm n;
    Conv qkv;
    Conv proj;
    int channels = 0;
};

}  // namespace

template <class S>
struct UNet1D<S>::Impl {
    DenoiserConfig cfg;
    std::vector<ParamSpec> specs;
    Linear emb1, emb2, start;
    int null_vec = -1;
    Conv conv_in;
    std::vector<std::vector<Res>> enc;
    Res mid1;
    Attn attn;
    Res mid2;
    std::vector<std::vector<Res>> dec;  // indexed by stage, run from the last stage down
    Norm out_norm;
    Conv conv_out;

    // Working copies place every parameter on a 64-byte boundary so that the
    // vectorized kernels, and hence the rounding, never depend on where the
    // caller's buffer happens to live.
    std::vector<std::size_t> padded_offset;
    std::size_t padded_total = 0;

    void finalize_layout() {
        constexpr std::size_t lanes = 64 / sizeof(double);
        padded_offset.clear();
        std::size_t off = 0;
        for (const auto& s : specs) {
            padded_offset.push_back(off);
            off += (s.size() + lanes - 1) / lanes * lanes;
        }
        padded_total = off;
    }

    nn::Mat<S> pack(const S* params) const {
        nn::Mat<S> buf = nn::Mat<S>::Zero(static_cast<Index>(padded_total), 1);
        for (std::size_t i = 0; i < specs.size(); ++i) {
            std::copy_n(params + specs[i].offset, specs[i].size(), buf.data() + padded_offset[i]);
        }
        return buf;
    }

    void unpack_add(const nn::Mat<S>& buf, S* out) const {
        for (std::size_t i = 0; i < specs.size(); ++i) {
            const S* src = buf.data() + padded_offset[i];
            S* dst = out + specs[i].offset;
            for (std::size_t j = 0; j < specs[i].size(); ++j) dst[j] += src[j];
        }
    }

    CMap<S> p(const S* base, int id) const {
        const auto& s = specs[static_cast<std::size_t>(id)];
        return CMap<S>(base + padded_offset[static_cast<std::size_t>(id)], s.rows, s.cols);
    }
    GMap<S> g(S* base, int id) const {
        const auto& s = specs[static_cast<std::size_t>(id)];
        return GMap<S>(base + padded_offset[static_cast<std::size_t>(id)], s.rows, s.cols);
    }
};

namespace {

template <class S>
using Mat = nn::Mat<S>;

template <class S>
struct ConvCache {
    Mat<S> input;  // im2col matrix for kernel 3, raw input for kernel 1
};

template <class S>
struct ResCache {
    nn::GroupNormCache<S> n1, n2;
    Mat<S> a1, a2;  // normalized pre-activations
    ConvCache<S> c1, c2, skip;
};

template <class S>
struct AttnCache {
    nn::GroupNormCache<S> n;
    ConvCache<S> qkv, proj;
    Mat<S> qkv_out;
    std::vector<Mat<S>> weights;  // per sample, L x L
    Index L = 0;
};

}  // namespace

template <class S>
struct Tape<S>::Impl {
    Index batch = 0;
    Mat<S> sinus, e1, e2, es, e_act;
    Mat<S> start;
    std::vector<std::uint8_t> is_null;
    ConvCache<S> conv_in;
    std::vector<ResCache<S>> enc, dec;
    ResCache<S> mid1, mid2;
    AttnCache<S> attn;
    std::vector<Index> dec_in_rows;  // channels before each concatenation
    nn::GroupNormCache<S> out_norm;
    Mat<S> out_pre;
    ConvCache<S> conv_out;
};

template <class S>
Tape<S>::Tape() : impl(std::make_unique<Impl>()) {}
template <class S>
Tape<S>::~Tape() = default;
template <class S>
Tape<S>::Tape(Tape&&) noexcept = default;
template <class S>
Tape<S>& Tape<S>::operator=(Tape&&) noexcept = default;

namespace {

template <class S, class Net>
Mat<S> conv_fwd(const Net& net, const S* P, const Conv& c, const Mat<S>& x, Index L, ConvCache<S>& cache) {
    if (c.k == 3) {
        nn::im2col3<S>(x, L, cache.input);
    } else {
        cache.input = x;
    }
    Mat<S> y = net.p(P, c.w) * cache.input;
    y.colwise() += net.p(P, c.b).col(0);
    return y;
}

template <class S, class Net>
Mat<S> conv_bwd(const Net& net, const S* P, S* G, const Conv& c, const Mat<S>& dy, Index L,
                const ConvCache<S>& cache, bool need_dx = true) {
    auto gw = net.g(G, c.w);
    auto gb = net.g(G, c.b);
    gw.noalias() += dy * cache.input.transpose();
    gb.col(0) += dy.rowwise().sum();
    if (!need_dx) return {};
    Mat<S> dcol = net.p(P, c.w).transpose() * dy;
    if (c.k == 1) return dcol;
    Mat<S> dx;
    nn::col2im3<S>(dcol, L, dx);
    return dx;
}

template <class S, class Net>
Mat<S> norm_fwd(const Net& net, const S* P, const Norm& n, const Mat<S>& x, Index L, nn::GroupNormCache<S>& cache) {
    return nn::group_norm<S>(x, L, n.groups, net.p(P, n.g), net.p(P, n.b), cache);
}

template <class S, class Net>
Mat<S> norm_bwd(const Net& net, const S* P, S* G, const Norm& n, const Mat<S>& dy, Index L,
                const nn::GroupNormCache<S>& cache) {
    auto gg = net.g(G, n.g);
    auto gb = net.g(G, n.b);
    return nn::group_norm_backward<S>(dy, L, net.p(P, n.g), cache, gg, gb, n.groups);
}

template <class S, class Net>
Mat<S> res_fwd(const Net& net, const S* P, const Res& r, const Mat<S>& x, const Mat<S>& e_act, Index L,
               ResCache<S>& c) {
    c.a1 = norm_fwd(net, P, r.n1, x, L, c.n1);
    Mat<S> h = conv_fwd(net, P, r.c1, nn::silu<S>(c.a1), L, c.c1);
    Mat<S> ep = net.p(P, r.emb.w) * e_act;
    ep.colwise() += net.p(P, r.emb.b).col(0);
    for (Index b = 0; b < ep.cols(); ++b) h.middleCols(b * L, L).colwise() += ep.col(b);
    c.a2 = norm_fwd(net, P, r.n2, h, L, c.n2);
    Mat<S> out = conv_fwd(net, P, r.c2, nn::silu<S>(c.a2), L, c.c2);
    if (r.has_skip) {
        out += conv_fwd(net, P, r.skip, x, L, c.skip);
    } else {
        out += x;
    }
    return out;
}

template <class S, class Net>
Mat<S> res_bwd(const Net& net, const S* P, S* G, const Res& r, const Mat<S>& dout, const Mat<S>& e_act, Index L,
               const ResCache<S>& c, Mat<S>& de_act) {
    Mat<S> ds2 = conv_bwd(net, P, G, r.c2, dout, L, c.c2);
    Mat<S> dh = norm_bwd(net, P, G, r.n2, nn::silu_backward<S>(c.a2, ds2), L, c.n2);
    Mat<S> dep(dh.rows(), e_act.cols());
    for (Index b = 0; b < e_act.cols(); ++b) dep.col(b) = dh.middleCols(b * L, L).rowwise().sum();
    auto gw = net.g(G, r.emb.w);
    auto gb = net.g(G, r.emb.b);
    gw.noalias() += dep * e_act.transpose();
    gb.col(0) += dep.rowwise().sum();
    de_act.noalias() += net.p(P, r.emb.w).transpose() * dep;
    Mat<S> ds1 = conv_bwd(net, P, G, r.c1, dh, L, c.c1);
    Mat<S> dx = norm_bwd(net, P, G, r.n1, nn::silu_backward<S>(c.a1, ds1), L, c.n1);
    if (r.has_skip) {
        dx += conv_bwd(net, P, G, r.skip, dout, L, c.skip);
    } else {
        dx += dout;
    }
    return dx;
}

template <class S, class Net>
Mat<S> attn_fwd(const Net& net, const S* P, const Attn& a, const Mat<S>& h, Index L, AttnCache<S>& c) {
    const Index C = a.channels;
    const Index batch = h.cols() / L;
    const S scale = S(1) / std::sqrt(static_cast<S>(C));
    c.L = L;
    const Mat<S> normed = norm_fwd(net, P, a.n, h, L, c.n);
    c.qkv_out = conv_fwd(net, P, a.qkv, normed, L, c.qkv);
    c.weights.assign(static_cast<std::size_t>(batch), Mat<S>());
    Mat<S> o(C, h.cols());
    for (Index b = 0; b < batch; ++b) {
        const auto q = c.qkv_out.block(0, b * L, C, L);
        const auto k = c.qkv_out.block(C, b * L, C, L);
        const auto v = c.qkv_out.block(2 * C, b * L, C, L);
        Mat<S> w = scale * (q.transpose() * k);
        for (Index i = 0; i < L; ++i) {
            const S m = w.row(i).maxCoeff();
            w.row(i) = (w.row(i).array() - m).exp();
            w.row(i) /= w.row(i).sum();
        }
        o.middleCols(b * L, L).noalias() = v * w.transpose();
        c.weights[static_cast<std::size_t>(b)] = std::move(w);
    }
    return h + conv_fwd(net, P, a.proj, o, L, c.proj);
}

template <class S, class Net>
Mat<S> attn_bwd(const Net& net, const S* P, S* G, const Attn& a, const Mat<S>& dout, const AttnCache<S>& c) {
    const Index C = a.channels;
    const Index L = c.L;
    const Index batch = dout.cols() / L;
    const S scale = S(1) / std::sqrt(static_cast<S>(C));
    const Mat<S> d_o = conv_bwd(net, P, G, a.proj, dout, L, c.proj);
    Mat<S> dqkv(3 * C, dout.cols());
    for (Index b = 0; b < batch; ++b) {
        const auto& w = c.weights[static_cast<std::size_t>(b)];
        const auto q = c.qkv_out.block(0, b * L, C, L);
        const auto k = c.qkv_out.block(C, b * L, C, L);
        const auto v = c.qkv_out.block(2 * C, b * L, C, L);
        const auto dob = d_o.middleCols(b * L, L);
        dqkv.block(2 * C, b * L, C, L).noalias() = dob * w;
        const Mat<S> dw = dob.transpose() * v;
        Mat<S> ds(L, L);
        for (Index i = 0; i < L; ++i) {
            const S dot = (dw.row(i).array() * w.row(i).array()).sum();
            ds.row(i) = w.row(i).array() * (dw.row(i).array() - dot);
        }
        dqkv.block(0, b * L, C, L).noalias() = scale * (k * ds.transpose());
        dqkv.block(C, b * L, C, L).noalias() = scale * (q * ds);
    }
    const Mat<S> dn = conv_bwd(net, P, G, a.qkv, dqkv, L, c.qkv);
    return dout + norm_bwd(net, P, G, a.n, dn, L, c.n);
}

}  // namespace

template <class S>
UNet1D<S>::UNet1D(const DenoiserConfig& cfg) : impl_(std::make_unique<Impl>()) {
    cfg.validate();
    auto& m = *impl_;
    m.cfg = cfg;
    Registry r(m.specs);
    const int h = cfg.hidden_dim;
    const int e = cfg.emb_dim();
    m.emb1 = Linear::make(r, "emb.fc1", cfg.freq_bands, e);
    m.emb2 = Linear::make(r, "emb.fc2", e, e);
    m.start = Linear::make(r, "emb.start", 2, e);
    m.null_vec = r.add("emb.null", e, 1, ParamSpec::Init::fan_in, 1);
    m.conv_in = Conv::make(r, "in.conv", cfg.channels, h, 3);

    auto make_res = [&](const std::string& name, int cin, int cout) {
        Res res;
        res.n1 = Norm::make(r, name + ".norm1", cin);
        res.c1 = Conv::make(r, name + ".conv1", cin, cout, 3);
        res.emb = Linear::make(r, name + ".emb", e, cout);
        res.n2 = Norm::make(r, name + ".norm2", cout);
        res.c2 = Conv::make(r, name + ".conv2", cout, cout, 3);
        res.has_skip = cin != cout;
        if (res.has_skip) res.skip = Conv::make(r, name + ".skip", cin, cout, 1);
        return res;
    };

    const auto stages = cfg.channel_mult.size();
    std::vector<int> stage_ch(stages);
    int cur = h;
    m.enc.resize(stages);
    for (std::size_t s = 0; s < stages; ++s) {
        stage_ch[s] = h * cfg.channel_mult[s];
        for (int j = 0; j < cfg.blocks_per_stage; ++j) {
            m.enc[s].push_back(make_res("enc" + std::to_string(s) + "." + std::to_string(j), cur, stage_ch[s]));
            cur = stage_ch[s];
        }
    }
    m.mid1 = make_res("mid.res1", cur, cur);
    m.attn.channels = cur;
    m.attn.n = Norm::make(r, "mid.attn.norm", cur);
    m.attn.qkv = Conv::make(r, "mid.attn.qkv", cur, 3 * cur, 1);
    m.attn.proj = Conv::make(r, "mid.attn.proj", cur, cur, 1, true);
    m.mid2 = make_res("mid.res2", cur, cur);
    m.dec.resize(stages);
    for (std::size_t s = stages; s-- > 0;) {
        for (int j = 0; j < cfg.blocks_per_stage; ++j) {
            const int cin = j == 0 ? cur + stage_ch[s] : stage_ch[s];
            m.dec[s].push_back(make_res("dec" + std::to_string(s) + "." + std::to_string(j), cin, stage_ch[s]));
            cur = stage_ch[s];
        }
    }
    m.out_norm = Norm::make(r, "out.norm", cur);
    m.conv_out = Conv::make(r, "out.conv", cur, cfg.channels, 3, true);
    m.finalize_layout();
}

template <class S>
UNet1D<S>::~UNet1D() = default;
template <class S>
UNet1D<S>::UNet1D(UNet1D&&) noexcept = default;

template <class S>
const DenoiserConfig& UNet1D<S>::config() const noexcept {
    return impl_->cfg;
}

template <class S>
const std::vector<ParamSpec>& UNet1D<S>::layout() const noexcept {
    return impl_->specs;
}

template <class S>
std::size_t UNet1D<S>::param_count() const noexcept {
    const auto& s = impl_->specs;
    return s.empty() ? 0 : s.back().offset + s.back().size();
}

template <class S>
typename UNet1D<S>::Mat UNet1D<S>::forward(const S* params, const Mat& x, const Vec& c_noise, const Mat& start,
                                           const std::vector<std::uint8_t>& is_null, Tape<S>* tape) const {
    const auto& m = *impl_;
    const Index batch = c_noise.size();
    const Index T = m.cfg.traj_len;
    if (x.rows() != m.cfg.channels || x.cols() != batch * T || start.rows() != 2 || start.cols() != batch ||
        static_cast<Index>(is_null.size()) != batch) {
        throw InvalidArgument("UNet1D::forward: input shape does not match the configuration");
    }
    const Mat packed = m.pack(params);
    const S* P = packed.data();
    typename Tape<S>::Impl local;
    auto& t = tape ? *tape->impl : local;
    t.batch = batch;
    t.start = start;
    t.is_null = is_null;

    const Index half = m.cfg.freq_bands / 2;
    t.sinus.resize(m.cfg.freq_bands, batch);
    for (Index i = 0; i < half; ++i) {
        const S f = std::pow(S(1e-4), static_cast<S>(i) / static_cast<S>(half - 1));
        for (Index b = 0; b < batch; ++b) {
            t.sinus(i, b) = std::cos(c_noise(b) * f);
            t.sinus(half + i, b) = std::sin(c_noise(b) * f);
        }
    }
    t.e1 = m.p(P, m.emb1.w) * t.sinus;
    t.e1.colwise() += m.p(P, m.emb1.b).col(0);
    t.e2 = m.p(P, m.emb2.w) * nn::silu<S>(t.e1);
    t.e2.colwise() += m.p(P, m.emb2.b).col(0);
    Mat cond_emb = m.p(P, m.start.w) * start;
    cond_emb.colwise() += m.p(P, m.start.b).col(0);
    for (Index b = 0; b < batch; ++b) {
        if (is_null[static_cast<std::size_t>(b)]) cond_emb.col(b) = m.p(P, m.null_vec).col(0);
    }
    t.es = t.e2 + cond_emb;
    t.e_act = nn::silu<S>(t.es);

    Index L = T;
    Mat h = conv_fwd(m, P, m.conv_in, x, L, t.conv_in);
    const auto stages = m.enc.size();
    std::vector<Mat> skips(stages);
    t.enc.assign(stages * static_cast<std::size_t>(m.cfg.blocks_per_stage), {});
    std::size_t ci = 0;
    for (std::size_t s = 0; s < stages; ++s) {
        for (const auto& r : m.enc[s]) h = res_fwd(m, P, r, h, t.e_act, L, t.enc[ci++]);
        skips[s] = h;
        if (s + 1 < stages) {
            h = nn::avgpool2<S>(h);
            L /= 2;
        }
    }
    h = res_fwd(m, P, m.mid1, h, t.e_act, L, t.mid1);
    h = attn_fwd(m, P, m.attn, h, L, t.attn);
    h = res_fwd(m, P, m.mid2, h, t.e_act, L, t.mid2);
    t.dec.assign(t.enc.size(), {});
    t.dec_in_rows.assign(stages, 0);
    ci = 0;
    for (std::size_t s = stages; s-- > 0;) {
        t.dec_in_rows[s] = h.rows();
        Mat cat(h.rows() + skips[s].rows(), h.cols());
        cat << h, skips[s];
        h = std::move(cat);
        for (const auto& r : m.dec[s]) h = res_fwd(m, P, r, h, t.e_act, L, t.dec[ci++]);
        if (s > 0) {
            h = nn::upsample2<S>(h);
            L *= 2;
        }
    }
    t.out_pre = norm_fwd(m, P, m.out_norm, h, L, t.out_norm);
    return conv_fwd(m, P, m.conv_out, nn::silu<S>(t.out_pre), L, t.conv_out);
}

template <class S>
void UNet1D<S>::backward(const S* params, const Tape<S>& tape, const Mat& d_out, S* grads) const {
    const auto& m = *impl_;
    const Mat packed = m.pack(params);
    const S* P = packed.data();
    Mat grad_buf = Mat::Zero(static_cast<Index>(m.padded_total), 1);
    S* G = grad_buf.data();
    const auto& t = *tape.impl;
    const auto stages = m.enc.size();
    const auto bps = static_cast<std::size_t>(m.cfg.blocks_per_stage);
    Index L = m.cfg.traj_len;
    Mat de_act = Mat::Zero(t.e_act.rows(), t.e_act.cols());

    Mat dh = conv_bwd(m, P, G, m.conv_out, d_out, L, t.conv_out);
    dh = norm_bwd(m, P, G, m.out_norm, nn::silu_backward<S>(t.out_pre, dh), L, t.out_norm);
    std::vector<Mat> dskips(stages);
    // The decoder ran from the last stage to the first; walk it back in reverse.
    for (std::size_t s = 0; s < stages; ++s) {
        if (s > 0) {
            dh = nn::upsample2_backward<S>(dh);
            L /= 2;
        }
        const std::size_t base = (stages - 1 - s) * bps;
        for (std::size_t j = bps; j-- > 0;) {
            dh = res_bwd(m, P, G, m.dec[s][j], dh, t.e_act, L, t.dec[base + j], de_act);
        }
        const Index top = t.dec_in_rows[s];
        dskips[s] = dh.bottomRows(dh.rows() - top);
        Mat keep = dh.topRows(top);
        dh = std::move(keep);
    }
    dh = res_bwd(m, P, G, m.mid2, dh, t.e_act, L, t.mid2, de_act);
    dh = attn_bwd(m, P, G, m.attn, dh, t.attn);
    dh = res_bwd(m, P, G, m.mid1, dh, t.e_act, L, t.mid1, de_act);
    for (std::size_t s = stages; s-- > 0;) {
        if (s + 1 < stages) {
            dh = nn::avgpool2_backward<S>(dh);
            L *= 2;
        }
        dh += dskips[s];
        for (std::size_t j = bps; j-- > 0;) {
            dh = res_bwd(m, P, G, m.enc[s][j], dh, t.e_act, L, t.enc[s * bps + j], de_act);
        }
    }
    conv_bwd(m, P, G, m.conv_in, dh, L, t.conv_in, false);

    const Mat des = nn::silu_backward<S>(t.es, de_act);
    for (Index b = 0; b < t.batch; ++b) {
        if (t.is_null[static_cast<std::size_t>(b)]) {
            m.g(G, m.null_vec).col(0) += des.col(b);
        } else {
            m.g(G, m.start.w).noalias() += des.col(b) * t.start.col(b).transpose();
            m.g(G, m.start.b).col(0) += des.col(b);
        }
    }
    const Mat e1_act = nn::silu<S>(t.e1);
    m.g(G, m.emb2.w).noalias() += des * e1_act.transpose();
    m.g(G, m.emb2.b).col(0) += des.rowwise().sum();
    const Mat de1 = nn::silu_backward<S>(t.e1, m.p(P, m.emb2.w).transpose() * des);
    m.g(G, m.emb1.w).noalias() += de1 * t.sinus.transpose();
    m.g(G, m.emb1.b).col(0) += de1.rowwise().sum();
    m.unpack_add(grad_buf, grads);
}

template class UNet1D<float>;
template class UNet1D<double>;
template class Tape<float>;
template class Tape<double>;

ParamStore init_params(const DenoiserConfig& cfg, std::uint64_t seed) {
    const UNet1D<double> net(cfg);
    ParamStore p;
    p.specs = net.layout();
    p.values.assign(net.param_count(), 0.0);
    p.init_seed = seed;
    for (std::size_t i = 0; i < p.specs.size(); ++i) {
        const auto& s = p.specs[i];
        Rng rng = make_rng(seed, i);
        double* v = p.values.data() + s.offset;
        switch (s.init) {
            case ParamSpec::Init::zeros:
                break;
            case ParamSpec::Init::ones:
                std::fill(v, v + s.size(), 1.0);
                break;
            case ParamSpec::Init::fan_in: {
                const double std = 1.0 / std::sqrt(static_cast<double>(s.fan_in));
                for (std::size_t j = 0; j < s.size(); ++j) v[j] = std * standard_normal(rng);
                break;
            }
        }
    }
    p.round_to_float();
    return p;
}

void randomize_params(ParamStore& p, std::uint64_t seed, double scale) {
    for (std::size_t i = 0; i < p.specs.size(); ++i) {
        const auto& s = p.specs[i];
        Rng rng = make_rng(seed, i);
        const double std = scale / std::sqrt(static_cast<double>(std::max(1, s.fan_in)));
        double* v = p.values.data() + s.offset;
        for (std::size_t j = 0; j < s.size(); ++j) {
            const double base = s.init == ParamSpec::Init::ones ? 1.0 : 0.0;
            v[j] = base + std * standard_normal(rng);
        }
    }
}

}  // namespace mobgen
