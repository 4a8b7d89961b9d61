#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "capfade/dataset_io.hpp"
#include "capfade/errors.hpp"

namespace capfade {

struct SmootherConfig {
    int window_length = 11;
    int poly_order = 3;
    int max_deriv = 2;

    void validate() const {
        if (window_length < 1 || window_length % 2 == 0) {
            throw ConfigError("Savitzky-Golay window must be a positive odd integer, got " +
                              std::to_string(window_length));
        }
        if (poly_order < 0 || window_length < poly_order + 1) {
            throw ConfigError("Savitzky-Golay window " + std::to_string(window_length) +
                              " too short for polynomial order " + std::to_string(poly_order));
        }
        if (max_deriv < 0 || max_deriv > 2 || poly_order < max_deriv) {
            throw ConfigError("max_deriv must lie in [0, min(2, poly_order)]");
        }
    }

    friend bool operator==(const SmootherConfig&, const SmootherConfig&) = default;
};

/// Window of about 10% of the series (odd, within [11, 101]), cubic fit.
/// Short series get the longest odd window they can hold.
inline SmootherConfig default_smoother(std::size_t n) {
    SmootherConfig cfg;
    int w = std::max(11, static_cast<int>(std::lround(0.1 * static_cast<double>(n))));
    if (w % 2 == 0) ++w;
    w = std::min(w, 101);
    const int fit = static_cast<int>(n) % 2 == 1 ? static_cast<int>(n) : static_cast<int>(n) - 1;
    cfg.window_length = std::max(std::min(w, fit), cfg.poly_order + 2);
    return cfg;
}

/// State of health: capacity over nominal capacity.
inline std::vector<double> normalize(const CapacitySeries& series) {
    std::vector<double> out(series.size());
    std::transform(series.capacity_ah().begin(), series.capacity_ah().end(), out.begin(),
                   [&](double c) { return c / series.nominal_capacity_ah(); });
    return out;
}

/// Convolution weights that evaluate the `deriv`-th derivative (per sample) of
/// the least-squares polynomial fitted over a centered window, at `offset`
/// samples from the window center. Offset 0 gives the classic SG kernel.
inline std::vector<double> savgol_weights(int window_length, int poly_order, int deriv,
                                          int offset) {
    const int half = window_length / 2;
    const int ncoef = poly_order + 1;
    // Positions scaled to [-1, 1] keep the normal equations well conditioned.
    const double scale = half > 0 ? static_cast<double>(half) : 1.0;
    Eigen::MatrixXd vander(window_length, ncoef);
    for (int r = 0; r < window_length; ++r) {
        const double u = static_cast<double>(r - half) / scale;
        double p = 1.0;
        for (int c = 0; c < ncoef; ++c) {
            vander(r, c) = p;
            p *= u;
        }
    }
    // Row k of the pseudo-inverse maps samples to the k-th polynomial coefficient.
    const Eigen::MatrixXd pinv = vander.householderQr().solve(
        Eigen::MatrixXd::Identity(window_length, window_length));

    const double u0 = static_cast<double>(offset) / scale;
    Eigen::RowVectorXd basis = Eigen::RowVectorXd::Zero(ncoef);
    for (int k = deriv; k < ncoef; ++k) {
        double falling = 1.0;
        for (int j = 0; j < deriv; ++j) falling *= static_cast<double>(k - j);
        basis(k) = falling * std::pow(u0, k - deriv);
    }
    const Eigen::RowVectorXd w = basis * pinv / std::pow(scale, deriv);
    return {w.data(), w.data() + w.size()};
}

/// Savitzky-Golay smoothing/differentiation of a uniformly sampled series.
/// Edge samples are evaluated off-center on the first/last full window
/// (polynomial extrapolation), so polynomials up to `poly_order` are reproduced
/// exactly everywhere. Derivatives are per unit of `dt`.
inline std::vector<double> savgol_filter(std::span<const double> y, const SmootherConfig& cfg,
                                         int deriv, double dt) {
    cfg.validate();
    if (deriv < 0 || deriv > cfg.max_deriv) {
        throw ConfigError("derivative order " + std::to_string(deriv) + " outside [0, " +
                          std::to_string(cfg.max_deriv) + "]");
    }
    if (!(dt > 0.0)) {
        throw ConfigError("sampling interval must be positive");
    }
    const auto n = static_cast<int>(y.size());
    const int w = cfg.window_length;
    if (n < w) {
        throw ConfigError("series of length " + std::to_string(n) +
                          " is shorter than the Savitzky-Golay window " + std::to_string(w));
    }
    const int half = w / 2;
    const double dscale = std::pow(dt, -deriv);
    std::vector<double> out(static_cast<std::size_t>(n));

    // Weights act on deviations from the window's middle sample: smoothing
    // weights sum to 1 and derivative weights to 0, so constants come out exact.
    auto apply = [&](const std::vector<double>& weights, int start) {
        const double ref = y[static_cast<std::size_t>(start + half)];
        double acc = 0.0;
        for (int j = 0; j < w; ++j) {
            acc += weights[static_cast<std::size_t>(j)] * (y[static_cast<std::size_t>(start + j)] - ref);
        }
        return deriv == 0 ? ref + acc : acc * dscale;
    };

    const auto center = savgol_weights(w, cfg.poly_order, deriv, 0);
    for (int i = half; i < n - half; ++i) out[static_cast<std::size_t>(i)] = apply(center, i - half);
    for (int i = 0; i < half; ++i) {
        const auto left = savgol_weights(w, cfg.poly_order, deriv, i - half);
        out[static_cast<std::size_t>(i)] = apply(left, 0);
        const auto right = savgol_weights(w, cfg.poly_order, deriv, half - i);
        out[static_cast<std::size_t>(n - 1 - i)] = apply(right, n - w);
    }
    return out;
}

} // namespace capfade
