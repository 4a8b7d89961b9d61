#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "capfade/dataset_io.hpp"
#include "capfade/errors.hpp"
#include "capfade/preprocess.hpp"

namespace capfade {

// kappa is in 1/cycle: normalized capacity (dimensionless) against raw cycle number.
struct CurvatureSeries {
    std::vector<double> cycle;
    std::vector<double> kappa;
    double dt = 1.0;
};

/// Signed curvature of the graph y(x): y'' / (1 + y'^2)^(3/2).
inline std::vector<double> curvature_from_derivatives(std::span<const double> y1,
                                                      std::span<const double> y2) {
    if (y1.size() != y2.size()) {
        throw DomainError("derivative series differ in length");
    }
    std::vector<double> kappa(y1.size());
    for (std::size_t i = 0; i < y1.size(); ++i) {
        const double g = 1.0 + y1[i] * y1[i];
        kappa[i] = y2[i] / (g * std::sqrt(g));
    }
    return kappa;
}

/// Normalize, smooth with SG derivatives and take the planar curvature.
/// The series must already sit on a uniform cycle grid.
inline CurvatureSeries approximate_curvature(const CapacitySeries& series,
                                             const SmootherConfig& cfg) {
    if (!series.is_uniform()) {
        throw DomainError("curvature needs a uniformly sampled series; resample first");
    }
    SmootherConfig c = cfg;
    c.max_deriv = std::max(c.max_deriv, 2);
    const double dt = series.mean_gap();
    const auto soh = normalize(series);
    const auto y1 = savgol_filter(soh, c, 1, dt);
    const auto y2 = savgol_filter(soh, c, 2, dt);
    return CurvatureSeries{series.cycle(), curvature_from_derivatives(y1, y2), dt};
}

} // namespace capfade
