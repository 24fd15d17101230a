#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "mobgen/diffusion.hpp"
#include "mobgen/rng.hpp"
#include "mobgen/types.hpp"

namespace mobgen::testing {

/// Predicts zero noise everywhere.
class ZeroEps final : public EpsModel {
public:
    TrajBatch eps(const TrajBatch& x, double, const BatchCondition&) const override {
        return TrajBatch::Zero(x.rows(), x.cols());
    }
};

/// Predicts the same noise regardless of state and level.
class ConstantEps final : public EpsModel {
public:
    explicit ConstantEps(TrajBatch e) : e_(std::move(e)) {}
    TrajBatch eps(const TrajBatch&, double, const BatchCondition&) const override { return e_; }

private:
    TrajBatch e_;
};

/// Posterior mean of x0 ~ N(0, s^2 I) given x0 + sigma * n.
class GaussianDenoiser final : public Denoiser {
public:
    explicit GaussianDenoiser(double s) : s_(s) {}
    TrajBatch denoise(const TrajBatch& x, const Eigen::VectorXd& sigma, const BatchCondition& cond) const override {
        const Eigen::Index T = x.cols() / static_cast<Eigen::Index>(cond.batch());
        TrajBatch out = x;
        for (Eigen::Index b = 0; b < sigma.size(); ++b) {
            const double c = s_ * s_ / (s_ * s_ + sigma(b) * sigma(b));
            out.middleCols(b * T, T) *= c;
        }
        return out;
    }

private:
    double s_;
};

inline TrajBatch random_batch(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double scale = 1.0) {
    Rng rng(seed);
    TrajBatch x(rows, cols);
    for (auto& v : x.reshaped()) v = scale * standard_normal(rng);
    return x;
}

inline BatchCondition zero_condition(std::size_t batch) {
    BatchCondition c;
    c.start.assign(batch, Coord{0.0, 0.0});
    c.is_null.assign(batch, 0);
    return c;
}

inline TrajectoryDataset make_dataset(int grid_side, std::initializer_list<std::initializer_list<std::uint32_t>> rows,
                                      SplitTag split = SplitTag::train) {
    std::vector<Trajectory> trajs;
    for (auto r : rows) trajs.push_back(make_trajectory(r));
    const int T = trajs.empty() ? 0 : static_cast<int>(trajs.front().length());
    return TrajectoryDataset(grid_side, 1.0, T, split, std::move(trajs));
}

/// Fresh empty directory under the system temporary directory.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    std::string tag = name;
    if (info) tag += std::string("_") + info->test_suite_name() + "_" + info->name();
    const auto dir = std::filesystem::temp_directory_path() / ("mobgen_test_" + tag);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace mobgen::testing
