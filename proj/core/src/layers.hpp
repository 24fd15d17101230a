#pragma once

// Building blocks of the denoiser with hand-written reverse passes. Every
// activation is a channel x (batch * length) matrix, column b*L + t.

#include <cmath>

#include <Eigen/Dense>

namespace mobgen::nn {

using Eigen::Index;

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using CMap = Eigen::Map<const Mat<S>>;
template <class S>
using GMap = Eigen::Map<Mat<S>>;

/// Rows [x(t-1); x(t); x(t+1)] with zero padding at each sequence boundary.
template <class S>
void im2col3(const Mat<S>& x, Index L, Mat<S>& col) {
    const Index c = x.rows();
    const Index n = x.cols();
    col.resize(3 * c, n);
    col.middleRows(c, c) = x;
    for (Index s = 0; s < n; s += L) {
        col.block(0, s, c, 1).setZero();
        col.block(2 * c, s + L - 1, c, 1).setZero();
        if (L < 2) continue;
        col.block(0, s + 1, c, L - 1) = x.block(0, s, c, L - 1);
        col.block(2 * c, s, c, L - 1) = x.block(0, s + 1, c, L - 1);
    }
}

template <class S>
void col2im3(const Mat<S>& dcol, Index L, Mat<S>& dx) {
    const Index c = dcol.rows() / 3;
    const Index n = dcol.cols();
    dx = dcol.middleRows(c, c);
    if (L < 2) return;
    for (Index s = 0; s < n; s += L) {
        dx.block(0, s, c, L - 1) += dcol.block(0, s + 1, c, L - 1);
        dx.block(0, s + 1, c, L - 1) += dcol.block(2 * c, s, c, L - 1);
    }
}

template <class S>
Mat<S> silu(const Mat<S>& x) {
    return (x.array() / (S(1) + (-x.array()).exp())).matrix();
}

/// d(silu)/dx applied to an upstream gradient.
template <class S>
Mat<S> silu_backward(const Mat<S>& x, const Mat<S>& dy) {
    const auto s = (S(1) + (-x.array()).exp()).inverse();
    return (dy.array() * s * (S(1) + x.array() * (S(1) - s))).matrix();
}

template <class S>
Mat<S> avgpool2(const Mat<S>& x) {
    Mat<S> y(x.rows(), x.cols() / 2);
    for (Index j = 0; j < y.cols(); ++j) y.col(j) = S(0.5) * (x.col(2 * j) + x.col(2 * j + 1));
    return y;
}

template <class S>
Mat<S> avgpool2_backward(const Mat<S>& dy) {
    Mat<S> dx(dy.rows(), dy.cols() * 2);
    for (Index j = 0; j < dy.cols(); ++j) {
        dx.col(2 * j) = S(0.5) * dy.col(j);
        dx.col(2 * j + 1) = S(0.5) * dy.col(j);
    }
    return dx;
}

template <class S>
Mat<S> upsample2(const Mat<S>& x) {
    Mat<S> y(x.rows(), x.cols() * 2);
    for (Index j = 0; j < x.cols(); ++j) {
        y.col(2 * j) = x.col(j);
        y.col(2 * j + 1) = x.col(j);
    }
    return y;
}

template <class S>
Mat<S> upsample2_backward(const Mat<S>& dy) {
    Mat<S> dx(dy.rows(), dy.cols() / 2);
    for (Index j = 0; j < dx.cols(); ++j) dx.col(j) = dy.col(2 * j) + dy.col(2 * j + 1);
    return dx;
}

template <class S>
struct GroupNormCache {
    Mat<S> xhat;
    Mat<S> inv_std;  // channels x batch, constant within a group
};

/// Sums each group of `cpg` consecutive entries of `v` and spreads the sum
/// back over the group.
template <class S>
Eigen::Matrix<S, Eigen::Dynamic, 1> group_spread(const Eigen::Matrix<S, Eigen::Dynamic, 1>& v, Index cpg) {
    const Index groups = v.size() / cpg;
    const Eigen::Matrix<S, 1, Eigen::Dynamic> sums =
        Eigen::Map<const Mat<S>>(v.data(), cpg, groups).colwise().sum();
    Eigen::Matrix<S, Eigen::Dynamic, 1> out(v.size());
    Eigen::Map<Mat<S>>(out.data(), cpg, groups) = sums.replicate(cpg, 1);
    return out;
}

template <class S>
Mat<S> group_norm(const Mat<S>& x, Index L, Index groups, const CMap<S>& gamma, const CMap<S>& beta,
                  GroupNormCache<S>& cache) {
    using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
    constexpr S eps = S(1e-5);
    const Index C = x.rows();
    const Index cpg = C / groups;
    const Index batch = x.cols() / L;
    const S n = static_cast<S>(cpg * L);
    cache.xhat.resize(C, x.cols());
    cache.inv_std.resize(C, batch);
    Mat<S> y(C, x.cols());
    for (Index b = 0; b < batch; ++b) {
        const auto blk = x.middleCols(b * L, L);
        const Vec mean = group_spread<S>(Vec(blk.rowwise().sum()), cpg) / n;
        auto xh = cache.xhat.middleCols(b * L, L);
        xh = blk.colwise() - mean;
        const Vec var = group_spread<S>(Vec(xh.array().square().rowwise().sum()), cpg) / n;
        const Vec inv = (var.array() + eps).rsqrt();
        cache.inv_std.col(b) = inv;
        xh = xh.array().colwise() * inv.array();
        y.middleCols(b * L, L) = (xh.array().colwise() * gamma.col(0).array()).colwise() + beta.col(0).array();
    }
    return y;
}

template <class S>
Mat<S> group_norm_backward(const Mat<S>& dy, Index L, const CMap<S>& gamma, const GroupNormCache<S>& cache,
                           GMap<S>& g_gamma, GMap<S>& g_beta, Index groups) {
    using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
    const Index C = dy.rows();
    const Index cpg = C / groups;
    const Index batch = dy.cols() / L;
    const S n = static_cast<S>(cpg * L);
    g_gamma.col(0) += (dy.array() * cache.xhat.array()).rowwise().sum().matrix();
    g_beta.col(0) += dy.rowwise().sum();
    Mat<S> dx(C, dy.cols());
    for (Index b = 0; b < batch; ++b) {
        const Mat<S> d = dy.middleCols(b * L, L).array().colwise() * gamma.col(0).array();
        const auto xh = cache.xhat.middleCols(b * L, L);
        const Vec sum_d = group_spread<S>(Vec(d.rowwise().sum()), cpg);
        const Vec sum_dx = group_spread<S>(Vec((d.array() * xh.array()).rowwise().sum()), cpg);
        const Vec scale = cache.inv_std.col(b) / n;
        dx.middleCols(b * L, L) =
            ((n * d.array() - xh.array().colwise() * sum_dx.array()).colwise() - sum_d.array()).colwise() *
            scale.array();
    }
    return dx;
}

}  // namespace mobgen::nn
