#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "errors.hpp"

namespace mfglq {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Uniform time grid on [0, T] with K steps (K+1 points).
struct TimeGrid {
    double T = 1.0;
    int K = 1;
    double dt = 1.0;
    std::vector<double> points;

    TimeGrid() = default;
    TimeGrid(double horizon, int steps) : T(horizon), K(steps) {
        if (!(horizon > 0.0) || steps < 1)
            throw config_error("TimeGrid requires T > 0 and K >= 1");
        dt = T / K;
        points.resize(K + 1);
        for (int k = 0; k <= K; ++k) points[k] = T * static_cast<double>(k) / K;
        points[K] = T;
    }
};

/// Matrix-valued path sampled on a TimeGrid (one matrix per grid point).
struct MatrixPath {
    TimeGrid grid;
    std::vector<Mat> values; // size K+1

    MatrixPath() = default;
    explicit MatrixPath(const TimeGrid& g) : grid(g), values(g.K + 1) {}

    const Mat& operator[](int k) const { return values[static_cast<size_t>(k)]; }
    Mat& operator[](int k) { return values[static_cast<size_t>(k)]; }

    /// Value at arbitrary t in [0,T] by linear interpolation between grid points.
    Mat at(double t) const {
        const double s = t / grid.dt;
        int k = static_cast<int>(std::floor(s));
        if (k < 0) k = 0;
        if (k >= grid.K) return values[static_cast<size_t>(grid.K)];
        const double w = s - k;
        return (1.0 - w) * values[static_cast<size_t>(k)] +
               w * values[static_cast<size_t>(k + 1)];
    }
};

/// Vector-valued path sampled on a TimeGrid.
struct VectorPath {
    TimeGrid grid;
    std::vector<Vec> values; // size K+1

    VectorPath() = default;
    explicit VectorPath(const TimeGrid& g) : grid(g), values(g.K + 1) {}

    const Vec& operator[](int k) const { return values[static_cast<size_t>(k)]; }
    Vec& operator[](int k) { return values[static_cast<size_t>(k)]; }

    Vec at(double t) const {
        const double s = t / grid.dt;
        int k = static_cast<int>(std::floor(s));
        if (k < 0) k = 0;
        if (k >= grid.K) return values[static_cast<size_t>(grid.K)];
        const double w = s - k;
        return (1.0 - w) * values[static_cast<size_t>(k)] +
               w * values[static_cast<size_t>(k + 1)];
    }
};

/// Kahan-compensated accumulator; Monte-Carlo cost means are required to use
/// compensated summation so results do not depend on batch scheduling.
struct KahanSum {
    double sum = 0.0;
    double c = 0.0;
    void add(double x) {
        const double y = x - c;
        const double t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    double value() const { return sum; }
};

/// Streaming mean/variance with compensated sums.
struct RunningStat {
    long long n = 0;
    KahanSum s1, s2;
    void add(double x) {
        ++n;
        s1.add(x);
        s2.add(x * x);
    }
    double mean() const { return n ? s1.value() / static_cast<double>(n) : 0.0; }
    double variance() const {
        if (n < 2) return 0.0;
        const double m = mean();
        double v = s2.value() / static_cast<double>(n) - m * m;
        return v > 0.0 ? v * static_cast<double>(n) / static_cast<double>(n - 1) : 0.0;
    }
    double stderr_mean() const {
        return n ? std::sqrt(variance() / static_cast<double>(n)) : 0.0;
    }
};

/// Reciprocal condition number estimate (2-norm, via SVD); intended for the
/// small dense matrices that appear in this solver.
inline double rcond(const Mat& M) {
    if (M.rows() == 0) return 1.0;
    Eigen::JacobiSVD<Mat> svd(M);
    const double smax = svd.singularValues()(0);
    const double smin = svd.singularValues()(svd.singularValues().size() - 1);
    if (smax <= 0.0) return 0.0;
    return smin / smax;
}

} // namespace mfglq
