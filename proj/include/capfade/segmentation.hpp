#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "capfade/curvature.hpp"
#include "capfade/errors.hpp"

namespace capfade {

struct MatrixProfile {
    std::vector<double> distances;
    std::vector<long> indices;
    int m = 0;
    int exclusion = 0;
};

struct PhasePartition {
    long onset_index = 0;
    long knee_index = 0;
    double onset_cycle = 0.0;
    double knee_cycle = 0.0;
    std::vector<double> cac;
    int m = 0;
    int regime_exclusion = 0;
};

namespace detail {

// Subsequences whose spread falls below this (relative to the whole series) are flat.
inline constexpr double kFlatRelativeStd = 1e-12;
// Rows sharing one running dot-product recurrence; fixed so results do not
// depend on how many threads share the work.
inline constexpr std::size_t kProfileChunkRows = 64;

struct ZStats {
    std::vector<double> values;  // centered and scaled copy of the input
    std::vector<double> mean;
    std::vector<double> stdev;
    std::vector<char> flat;
};

inline ZStats sliding_stats(std::span<const double> x, std::size_t m) {
    const std::size_t n = x.size();
    double gmean = 0.0;
    for (double v : x) gmean += v;
    gmean /= static_cast<double>(n);
    double gvar = 0.0;
    for (double v : x) gvar += (v - gmean) * (v - gmean);
    const double gstd = std::sqrt(gvar / static_cast<double>(n));
    if (!(gstd > 0.0)) {
        throw DegenerateInputError("all subsequences are constant");
    }
    ZStats z;
    z.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) z.values[i] = (x[i] - gmean) / gstd;

    const std::size_t count = n - m + 1;
    z.mean.resize(count);
    z.stdev.resize(count);
    z.flat.resize(count);
    bool any_structure = false;
    for (std::size_t i = 0; i < count; ++i) {
        double mu = 0.0;
        for (std::size_t k = 0; k < m; ++k) mu += z.values[i + k];
        mu /= static_cast<double>(m);
        double var = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            const double d = z.values[i + k] - mu;
            var += d * d;
        }
        z.mean[i] = mu;
        z.stdev[i] = std::sqrt(var / static_cast<double>(m));
        z.flat[i] = z.stdev[i] < kFlatRelativeStd;
        any_structure = any_structure || !z.flat[i];
    }
    if (!any_structure) {
        throw DegenerateInputError("all subsequences are constant");
    }
    return z;
}

inline double znorm_distance_from_dot(const ZStats& z, std::size_t i, std::size_t j, double dot,
                                      double m) {
    const double cap = 2.0 * std::sqrt(m);
    const bool fi = z.flat[i] != 0;
    const bool fj = z.flat[j] != 0;
    if (fi && fj) return 0.0;
    if (fi || fj) return cap;
    const double rho = (dot - m * z.mean[i] * z.mean[j]) / (m * z.stdev[i] * z.stdev[j]);
    const double d2 = 2.0 * m * (1.0 - rho);
    return std::min(cap, std::sqrt(std::max(0.0, d2)));
}

// Distance recomputed from the two z-normalized subsequences; the running
// dot products only choose the neighbor.
inline double direct_distance(const ZStats& z, std::size_t i, std::size_t j, std::size_t m) {
    const double cap = 2.0 * std::sqrt(static_cast<double>(m));
    const bool fi = z.flat[i] != 0;
    const bool fj = z.flat[j] != 0;
    if (fi && fj) return 0.0;
    if (fi || fj) return cap;
    double acc = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        const double a = (z.values[i + k] - z.mean[i]) / z.stdev[i];
        const double b = (z.values[j + k] - z.mean[j]) / z.stdev[j];
        acc += (a - b) * (a - b);
    }
    return std::min(cap, std::sqrt(acc));
}

} // namespace detail

inline int default_exclusion(int m) { return (m + 1) / 2; }

/// Self-join matrix profile under z-normalized Euclidean distance.
/// Neighbors closer than `exclusion + 1` samples are trivial matches and skipped;
/// ties go to the smallest neighbor index. `threads == 0` uses the hardware count.
inline MatrixProfile matrix_profile(std::span<const double> x, int m, int exclusion,
                                    unsigned threads = 1) {
    const std::size_t n = x.size();
    if (m < 4 || static_cast<std::size_t>(m) * 2 > n) {
        throw ConfigError("subsequence length " + std::to_string(m) + " must lie in [4, " +
                          std::to_string(n / 2) + "]");
    }
    if (exclusion < 1) {
        throw ConfigError("exclusion zone must be at least 1 sample");
    }
    const auto mm = static_cast<std::size_t>(m);
    const std::size_t count = n - mm + 1;
    const auto excl = static_cast<std::size_t>(exclusion);
    if ((count - 1) - (count - 1) / 2 <= excl) {
        throw ConfigError("exclusion zone " + std::to_string(exclusion) +
                          " leaves some subsequences without candidates");
    }
    const detail::ZStats z = detail::sliding_stats(x, mm);
    const auto& v = z.values;

    MatrixProfile mp;
    mp.m = m;
    mp.exclusion = exclusion;
    mp.distances.assign(count, 0.0);
    mp.indices.assign(count, 0);

    const std::size_t chunks = (count + detail::kProfileChunkRows - 1) / detail::kProfileChunkRows;
    auto run_chunk = [&](std::size_t c) {
        const std::size_t r0 = c * detail::kProfileChunkRows;
        const std::size_t r1 = std::min(count, r0 + detail::kProfileChunkRows);
        std::vector<double> dots(count);
        for (std::size_t j = 0; j < count; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < mm; ++k) acc += v[r0 + k] * v[j + k];
            dots[j] = acc;
        }
        for (std::size_t r = r0; r < r1; ++r) {
            if (r > r0) {
                for (std::size_t j = count - 1; j >= 1; --j) {
                    dots[j] = dots[j - 1] - v[r - 1] * v[j - 1] + v[r + mm - 1] * v[j + mm - 1];
                }
                double acc = 0.0;
                for (std::size_t k = 0; k < mm; ++k) acc += v[r + k] * v[k];
                dots[0] = acc;
            }
            double best = std::numeric_limits<double>::infinity();
            std::size_t best_j = 0;
            for (std::size_t j = 0; j < count; ++j) {
                const std::size_t gap = j > r ? j - r : r - j;
                if (gap <= excl) continue;
                const double d = detail::znorm_distance_from_dot(z, r, j, dots[j],
                                                                 static_cast<double>(mm));
                if (d < best) {
                    best = d;
                    best_j = j;
                }
            }
            mp.distances[r] = std::isfinite(best) ? detail::direct_distance(z, r, best_j, mm) : best;
            mp.indices[r] = static_cast<long>(best_j);
        }
    };

    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, chunks));
    if (threads <= 1) {
        for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                for (std::size_t c = next++; c < chunks; c = next++) run_chunk(c);
            });
        }
    }
    return mp;
}

/// FLUSS corrected arc curve: arcs crossing each position over the count expected
/// for random neighbors (2k(L-k)/L), capped at 1. The first and last `m` entries are 1.
inline std::vector<double> corrected_arc_curve(const MatrixProfile& mp) {
    const std::size_t len = mp.indices.size();
    std::vector<long> delta(len + 1, 0);
    for (std::size_t i = 0; i < len; ++i) {
        const auto j = static_cast<std::size_t>(mp.indices[i]);
        const std::size_t lo = std::min(i, j);
        const std::size_t hi = std::max(i, j);
        if (hi > lo + 1) {
            delta[lo + 1] += 1;
            delta[hi] -= 1;
        }
    }
    std::vector<double> cac(len, 1.0);
    long running = 0;
    const double l = static_cast<double>(len);
    for (std::size_t k = 0; k < len; ++k) {
        running += delta[k];
        const double kd = static_cast<double>(k);
        const double ideal = 2.0 * kd * (l - kd) / l;
        if (ideal > 0.0) cac[k] = std::min(1.0, static_cast<double>(running) / ideal);
    }
    const auto edge = std::min(len, static_cast<std::size_t>(std::max(mp.m, 0)));
    std::fill(cac.begin(), cac.begin() + static_cast<std::ptrdiff_t>(edge), 1.0);
    std::fill(cac.end() - static_cast<std::ptrdiff_t>(edge), cac.end(), 1.0);
    return cac;
}

/// Picks `n_boundaries` minima of the arc curve, masking +-exclusion samples around
/// each pick. Returned ascending.
inline std::vector<long> extract_regimes(std::span<const double> cac, int n_boundaries,
                                         int exclusion) {
    if (n_boundaries < 1) throw ConfigError("need at least one regime boundary");
    if (exclusion < 1) throw ConfigError("regime exclusion must be at least 1 sample");
    if (cac.size() < static_cast<std::size_t>(n_boundaries + 1) * static_cast<std::size_t>(exclusion)) {
        throw ConfigError("arc curve of length " + std::to_string(cac.size()) + " too short for " +
                          std::to_string(n_boundaries) + " boundaries with exclusion " +
                          std::to_string(exclusion));
    }
    std::vector<char> masked(cac.size(), 0);
    std::vector<long> picks;
    for (int b = 0; b < n_boundaries; ++b) {
        double best = std::numeric_limits<double>::infinity();
        long best_k = -1;
        for (std::size_t k = 0; k < cac.size(); ++k) {
            if (!masked[k] && cac[k] < best) {
                best = cac[k];
                best_k = static_cast<long>(k);
            }
        }
        if (best_k < 0) {
            throw ConfigError("exclusion masks the whole arc curve before all boundaries are found");
        }
        picks.push_back(best_k);
        const long lo = std::max(0L, best_k - exclusion);
        const long hi = std::min(static_cast<long>(cac.size()) - 1, best_k + exclusion);
        for (long k = lo; k <= hi; ++k) masked[static_cast<std::size_t>(k)] = 1;
    }
    std::sort(picks.begin(), picks.end());
    return picks;
}

struct SegmentationConfig {
    int m = 0;                    // 0: clamp(round(N/20), 10, 100)
    int exclusion = 0;            // 0: ceil(m/2)
    int regime_exclusion_factor = 5;
    int n_boundaries = 2;
    unsigned threads = 1;
    // Peak-to-peak curvature (1/cycle) at or below this is a straight line.
    double flat_curvature = 1e-12;

    friend bool operator==(const SegmentationConfig&, const SegmentationConfig&) = default;
};

inline int default_subsequence_length(std::size_t n) {
    const long m = std::clamp(std::lround(static_cast<double>(n) / 20.0), 10L, 100L);
    return static_cast<int>(std::max(4L, std::min(m, static_cast<long>(n / 4))));
}

struct RegimeSplit {
    std::vector<long> boundaries;
    std::vector<double> cac;
    int m = 0;
    int regime_exclusion = 0;
};

/// Matrix profile, arc curve and regime extraction over a curvature series.
inline RegimeSplit segment_regimes(std::span<const double> kappa, const SegmentationConfig& cfg) {
    const std::size_t n = kappa.size();
    const int m = cfg.m > 0 ? cfg.m : default_subsequence_length(n);
    if (n < 4 * static_cast<std::size_t>(m)) {
        throw InsufficientDataError("curvature series of length " + std::to_string(n) +
                                    " is shorter than 4 subsequence lengths (m = " +
                                    std::to_string(m) + ")");
    }
    const auto [lo, hi] = std::minmax_element(kappa.begin(), kappa.end());
    if (!(*hi - *lo > cfg.flat_curvature)) {
        throw DegenerateInputError("curvature is flat; no knee is detectable");
    }
    const int excl = cfg.exclusion > 0 ? cfg.exclusion : default_exclusion(m);
    const auto mp = matrix_profile(kappa, m, excl, cfg.threads);
    RegimeSplit split;
    split.cac = corrected_arc_curve(mp);
    split.m = m;
    const auto fit = static_cast<int>(split.cac.size() / static_cast<std::size_t>(cfg.n_boundaries + 1));
    split.regime_exclusion = std::max(1, std::min(cfg.regime_exclusion_factor * m, fit));
    split.boundaries = extract_regimes(split.cac, cfg.n_boundaries, split.regime_exclusion);
    return split;
}

/// Knee-onset and knee as the two regime boundaries of the curvature series.
inline PhasePartition identify_knee(const CurvatureSeries& curv, const SegmentationConfig& cfg) {
    if (cfg.n_boundaries != 2) {
        throw ConfigError("knee identification uses exactly two regime boundaries");
    }
    auto split = segment_regimes(curv.kappa, cfg);
    const long n = static_cast<long>(curv.kappa.size());
    const long onset = split.boundaries[0];
    const long knee = split.boundaries[1];
    if (!(0 < onset && onset < knee && knee < n - 1)) {
        throw DegenerateInputError("arc curve has no interior regime boundaries; no knee is detectable");
    }
    PhasePartition part;
    part.onset_index = onset;
    part.knee_index = knee;
    part.onset_cycle = curv.cycle[static_cast<std::size_t>(onset)];
    part.knee_cycle = curv.cycle[static_cast<std::size_t>(knee)];
    part.cac = std::move(split.cac);
    part.m = split.m;
    part.regime_exclusion = split.regime_exclusion;
    return part;
}

inline PhasePartition identify_knee(const CurvatureSeries& curv, int m) {
    SegmentationConfig cfg;
    cfg.m = m;
    return identify_knee(curv, cfg);
}

} // namespace capfade
