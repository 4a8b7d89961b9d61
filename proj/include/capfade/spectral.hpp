#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "capfade/curvature.hpp"
#include "capfade/errors.hpp"
#include "capfade/segmentation.hpp"

namespace capfade {

enum class WindowKind { rectangular, hann };

inline std::string_view to_string(WindowKind k) {
    return k == WindowKind::rectangular ? "rectangular" : "hann";
}

inline WindowKind parse_window_kind(std::string_view s) {
    if (s == "rectangular" || s == "rect") return WindowKind::rectangular;
    if (s == "hann") return WindowKind::hann;
    throw ConfigError("unknown window '" + std::string(s) + "' (expected rectangular or hann)");
}

struct WindowSpec {
    WindowKind kind = WindowKind::rectangular;
    std::size_t length = 0;
};

/// One-sided PSD. Interior bins hold twice the two-sided density; DC and
/// Nyquist are stored as-is, so sum(two-sided density) * df == total_power.
struct PsdEstimate {
    std::vector<double> freq;     // 1/cycle
    std::vector<double> density;  // (signal units)^2 * cycle
    double df = 0.0;
    double dt = 1.0;
    double total_power = 0.0;
    std::size_t segments = 1;
    std::size_t segment_len = 0;
};

inline std::vector<double> window_coefficients(const WindowSpec& spec) {
    const std::size_t n = spec.length;
    if (n == 0) throw ConfigError("window length must be positive");
    if (spec.kind == WindowKind::rectangular) return std::vector<double>(n, 1.0);
    // A 2-point Hann window is identically zero.
    if (n < 3) throw ConfigError("Hann window needs at least 3 points");
    std::vector<double> r(n);
    const double denom = static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        r[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / denom));
    }
    // Pin the exact zeros/ones the closed form lands on.
    r.front() = 0.0;
    r.back() = 0.0;
    if (n % 2 == 1) r[n / 2] = 1.0;
    return r;
}

/// sqrt(sum r^2); makes the windowed spectrum satisfy Parseval.
inline double normalization_constant(std::span<const double> r) {
    double acc = 0.0;
    for (double v : r) acc += v * v;
    if (!(acc > 0.0)) throw DomainError("window is identically zero");
    return std::sqrt(acc);
}

namespace detail {

inline std::vector<std::complex<double>> dft(std::vector<std::complex<double>> buf) {
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> out;
    fft.fwd(out, buf);
    return out;
}

// DFT of x * r, zero-padded to nfft (>= len(x)).
inline std::vector<std::complex<double>> windowed_spectrum(std::span<const double> x,
                                                           std::span<const double> r,
                                                           std::size_t nfft) {
    std::vector<std::complex<double>> buf(nfft, {0.0, 0.0});
    for (std::size_t i = 0; i < x.size(); ++i) buf[i] = {x[i] * r[i], 0.0};
    return dft(std::move(buf));
}

inline PsdEstimate fold_one_sided(const std::vector<double>& two_sided, double dt) {
    const std::size_t n = two_sided.size();
    PsdEstimate est;
    est.dt = dt;
    est.df = 1.0 / (static_cast<double>(n) * dt);
    const std::size_t half = n / 2;
    est.freq.resize(half + 1);
    est.density.resize(half + 1);
    double total = 0.0;
    for (double s : two_sided) total += s;
    est.total_power = total * est.df;
    for (std::size_t k = 0; k <= half; ++k) {
        est.freq[k] = static_cast<double>(k) / (static_cast<double>(n) * dt);
        const bool unpaired = k == 0 || (n % 2 == 0 && k == half);
        est.density[k] = unpaired ? two_sided[k] : two_sided[k] + two_sided[n - k];
    }
    return est;
}

} // namespace detail

/// X(k) = sum_n x(n) r(n) exp(-j 2 pi n k / N).
inline std::vector<std::complex<double>> windowed_dft(std::span<const double> x,
                                                      std::span<const double> r) {
    if (x.size() != r.size()) {
        throw DomainError("signal and window lengths differ");
    }
    if (x.empty()) return {};
    return detail::windowed_spectrum(x, r, x.size());
}

/// E = dt * sum |X(k)/C|^2.
inline double signal_energy(std::span<const std::complex<double>> spectrum, double c, double dt) {
    double acc = 0.0;
    for (const auto& v : spectrum) acc += std::norm(v / c);
    return dt * acc;
}

/// P = E / (N dt).
inline double signal_power(std::span<const std::complex<double>> spectrum, double c,
                           std::size_t n, double dt) {
    return signal_energy(spectrum, c, dt) / (static_cast<double>(n) * dt);
}

/// S(k) = dt |X(k)/C|^2, optionally zero-padded to `nfft` points.
inline PsdEstimate psd_windowed(std::span<const double> x, const WindowSpec& spec, double dt,
                                std::size_t nfft = 0) {
    if (x.size() != spec.length) throw DomainError("signal and window lengths differ");
    if (!(dt > 0.0)) throw ConfigError("sampling interval must be positive");
    if (nfft == 0) nfft = x.size();
    if (nfft < x.size()) throw ConfigError("transform length shorter than the signal");
    const auto r = window_coefficients(spec);
    const double c = normalization_constant(r);
    const auto spectrum = detail::windowed_spectrum(x, r, nfft);
    std::vector<double> s(nfft);
    for (std::size_t k = 0; k < nfft; ++k) s[k] = dt * std::norm(spectrum[k] / c);
    auto est = detail::fold_one_sided(s, dt);
    est.segment_len = x.size();
    return est;
}

/// S_N(k) = (1/N) |sum x(n) exp(-j 2 pi n k / N)|^2, times dt for density units.
inline PsdEstimate periodogram(std::span<const double> x, double dt) {
    if (x.size() < 2) throw InsufficientDataError("periodogram needs at least 2 samples");
    if (!(dt > 0.0)) throw ConfigError("sampling interval must be positive");
    std::vector<std::complex<double>> buf(x.begin(), x.end());
    const auto spectrum = detail::dft(std::move(buf));
    const double n = static_cast<double>(x.size());
    std::vector<double> s(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) s[k] = dt * std::norm(spectrum[k]) / n;
    auto est = detail::fold_one_sided(s, dt);
    est.segment_len = x.size();
    return est;
}

struct WelchConfig {
    std::size_t segment_len = 0;  // 0: max(8, floor(2N/9)), capped at N
    double overlap = 0.5;
    WindowKind window = WindowKind::hann;
    bool detrend = true;          // subtract each segment's mean before windowing
    std::size_t nfft = 0;         // 0: no zero padding

    friend bool operator==(const WelchConfig&, const WelchConfig&) = default;
};

inline std::size_t default_segment_len(std::size_t n) {
    return std::min(n, std::max<std::size_t>(8, 2 * n / 9));
}

namespace detail {

inline PsdEstimate welch_impl(std::span<const double> x, const WelchConfig& cfg, double dt,
                              std::size_t max_segments) {
    const std::size_t n = x.size();
    const std::size_t seg = cfg.segment_len == 0 ? default_segment_len(n) : cfg.segment_len;
    if (seg < 4) throw ConfigError("Welch segment length must be at least 4");
    if (seg > n) {
        throw ConfigError("Welch segment length " + std::to_string(seg) +
                          " exceeds series length " + std::to_string(n));
    }
    if (!(cfg.overlap >= 0.0 && cfg.overlap < 1.0)) {
        throw ConfigError("Welch overlap must lie in [0, 1)");
    }
    if (!(dt > 0.0)) throw ConfigError("sampling interval must be positive");
    const std::size_t nfft = cfg.nfft == 0 ? seg : cfg.nfft;
    if (nfft < seg) throw ConfigError("transform length shorter than the Welch segment");
    const auto hop = static_cast<std::size_t>(
        std::max(1L, std::lround(static_cast<double>(seg) * (1.0 - cfg.overlap))));

    const auto r = window_coefficients({cfg.window, seg});
    const double c = normalization_constant(r);
    std::vector<double> acc(nfft, 0.0);
    std::vector<double> buf(seg);
    std::size_t count = 0;
    for (std::size_t start = 0; start + seg <= n && count < max_segments; start += hop) {
        std::copy(x.begin() + static_cast<std::ptrdiff_t>(start),
                  x.begin() + static_cast<std::ptrdiff_t>(start + seg), buf.begin());
        if (cfg.detrend) {
            double mean = 0.0;
            for (double v : buf) mean += v;
            mean /= static_cast<double>(seg);
            for (double& v : buf) v -= mean;
        }
        const auto spectrum = windowed_spectrum(buf, r, nfft);
        for (std::size_t k = 0; k < nfft; ++k) acc[k] += dt * std::norm(spectrum[k] / c);
        ++count;
    }
    for (double& v : acc) v /= static_cast<double>(count);
    auto est = fold_one_sided(acc, dt);
    est.segments = count;
    est.segment_len = seg;
    return est;
}

} // namespace detail

/// Averaged windowed periodograms over overlapping segments.
inline PsdEstimate welch_psd(std::span<const double> x, const WelchConfig& cfg, double dt) {
    return detail::welch_impl(x, cfg, dt, static_cast<std::size_t>(-1));
}

/// Average of K non-overlapping rectangular periodograms of length floor(N/K).
inline PsdEstimate bartlett_psd(std::span<const double> x, std::size_t n_segments, double dt) {
    if (n_segments < 1) throw ConfigError("Bartlett needs at least one segment");
    const std::size_t seg = x.size() / n_segments;
    if (seg < 4) throw ConfigError("Bartlett segments must hold at least 4 samples");
    WelchConfig cfg;
    cfg.segment_len = seg;
    cfg.overlap = 0.0;
    cfg.window = WindowKind::rectangular;
    cfg.detrend = false;
    return detail::welch_impl(x, cfg, dt, n_segments);
}

inline constexpr std::size_t kMinPhaseSamples = 8;

struct PhaseSpectrum {
    int phase = 0;  // 1, 2 or 3
    std::size_t begin = 0;
    std::size_t end = 0;  // exclusive
    std::optional<PsdEstimate> psd;
    std::string error;    // set when psd is empty
};

/// Welch PSD of the curvature inside each of the three life phases. A phase
/// shorter than the configured segment uses its own length as the segment.
inline std::array<PhaseSpectrum, 3> phase_psd(const CurvatureSeries& curv,
                                              const PhasePartition& part,
                                              const WelchConfig& cfg) {
    const std::size_t n = curv.kappa.size();
    const auto onset = static_cast<std::size_t>(part.onset_index);
    const auto knee = static_cast<std::size_t>(part.knee_index);
    if (!(onset < knee && knee <= n)) throw DomainError("phase partition does not fit the series");
    const std::array<std::size_t, 4> edges{0, onset, knee, n};
    std::array<PhaseSpectrum, 3> out;
    for (int p = 0; p < 3; ++p) {
        auto& ph = out[static_cast<std::size_t>(p)];
        ph.phase = p + 1;
        ph.begin = edges[static_cast<std::size_t>(p)];
        ph.end = edges[static_cast<std::size_t>(p) + 1];
        const std::size_t len = ph.end - ph.begin;
        if (len < kMinPhaseSamples) {
            ph.error = "phase " + std::to_string(p + 1) + " has " + std::to_string(len) +
                       " samples, fewer than " + std::to_string(kMinPhaseSamples);
            continue;
        }
        WelchConfig local = cfg;
        if (local.segment_len > len) local.segment_len = len;
        if (local.nfft != 0 && local.nfft < (local.segment_len == 0 ? default_segment_len(len) : local.segment_len)) {
            local.nfft = 0;
        }
        const std::span<const double> slice(curv.kappa.data() + ph.begin, len);
        ph.psd = welch_psd(slice, local, curv.dt);
    }
    return out;
}

} // namespace capfade
