#pragma once

#include <cmath>
#include <vector>

#include "sgsim/tensor.hpp"

namespace sgsim {

/// Online per-feature normalizer: accumulates count/sum/sum-of-squares and
/// standardizes with population statistics. Accumulators are double so long
/// training runs do not lose feature-scale precision.
struct RunningNormalizer {
    int width = 0;
    double count = 0.0;
    std::vector<double> sum, sumsq;

    RunningNormalizer() = default;
    explicit RunningNormalizer(int w) : width(w), sum(w, 0.0), sumsq(w, 0.0) {}

    void update_row(const double* row) {
        count += 1.0;
        for (int j = 0; j < width; ++j) {
            sum[j] += row[j];
            sumsq[j] += row[j] * row[j];
        }
    }

    void update(const TensorT<double>& rows) {
        if (rows.cols() != width) throw std::invalid_argument("normalizer: width mismatch");
        for (int i = 0; i < rows.rows(); ++i) update_row(&rows.data[(size_t)i * width]);
    }

    bool active() const { return count >= 2.0; }

    double mean(int j) const { return active() ? sum[j] / count : 0.0; }

    double stddev(int j) const {
        if (!active()) return 1.0;
        double mu = sum[j] / count;
        double var = sumsq[j] / count - mu * mu;
        if (var < 0.0) var = 0.0;
        double sd = std::sqrt(var);
        return sd < 1e-8 ? 1e-8 : sd;
    }

    /// (x - mean) / std, in place. Identity until two samples have been seen.
    void apply(TensorT<double>& rows) const {
        if (rows.size() == 0) return;
        if (rows.cols() != width) throw std::invalid_argument("normalizer: width mismatch");
        if (!active()) return;
        std::vector<double> mu(width), sd(width);
        for (int j = 0; j < width; ++j) {
            mu[j] = mean(j);
            sd[j] = stddev(j);
        }
        for (int i = 0; i < rows.rows(); ++i)
            for (int j = 0; j < width; ++j) {
                double& x = rows.data[(size_t)i * width + j];
                x = (x - mu[j]) / sd[j];
            }
    }

    /// x * std + mean for one row, used to map predictions back to raw units.
    void denormalize_row(double* row) const {
        if (!active()) return;
        for (int j = 0; j < width; ++j) row[j] = row[j] * stddev(j) + mean(j);
    }
};

}  // namespace sgsim
