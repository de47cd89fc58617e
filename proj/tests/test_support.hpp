#pragma once

#include <filesystem>
#include <functional>
#include <string>

#include "facemotion/nn/tensor.hpp"

namespace fmtest {

using facemotion::nn::Mat;

// Central finite differences of a scalar function of a matrix.
inline Mat numeric_gradient(const std::function<double(const Mat&)>& f, const Mat& x0,
                            double h = 1e-5) {
    Mat grad(x0.rows(), x0.cols());
    Mat x = x0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            const double orig = x(i, j);
            x(i, j) = orig + h;
            const double up = f(x);
            x(i, j) = orig - h;
            const double down = f(x);
            x(i, j) = orig;
            grad(i, j) = (up - down) / (2.0 * h);
        }
    }
    return grad;
}

inline double max_rel_error(const Mat& analytic, const Mat& numeric) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < analytic.rows(); ++i) {
        for (Eigen::Index j = 0; j < analytic.cols(); ++j) {
            const double a = analytic(i, j);
            const double n = numeric(i, j);
            if (std::abs(a) < 1e-8 && std::abs(n) < 1e-8) continue;
            worst = std::max(worst, std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6}));
        }
    }
    return worst;
}

// Unique scratch directory under the test binary's working directory.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() /
                ("facemotion-test-" + tag + "-" + std::to_string(::getpid()));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace fmtest
