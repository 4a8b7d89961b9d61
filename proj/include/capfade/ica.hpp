#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "capfade/dataset_io.hpp"
#include "capfade/errors.hpp"
#include "capfade/preprocess.hpp"

namespace capfade {

struct IcCurve {
    std::vector<double> voltage_v;  // uniform, ascending
    std::vector<double> dq_dv;      // Ah/V, peaks positive for either sweep direction
    int rpt_index = 0;
    double cycle_at_rpt = 0.0;
    SweepDirection direction = SweepDirection::charge;
};

struct IcPeak {
    double v_peak = 0.0;
    double amplitude = 0.0;
    std::size_t index = 0;
    bool interior = true;  // false: no local maximum inside the window, edge maximum returned
};

struct PeakRecord {
    int rpt_index = 0;
    double cycle_at_rpt = 0.0;
    double v_peak = 0.0;
    double amplitude = 0.0;
    bool interior = true;
};

using PeakTrack = std::vector<PeakRecord>;

struct VoltageWindow {
    double v_min = -std::numeric_limits<double>::infinity();
    double v_max = std::numeric_limits<double>::infinity();
};

inline constexpr std::size_t kMinIcGridSpan = 50;

/// Default IC smoother: 9 points (45 mV at the 5 mV grid), cubic.
inline SmootherConfig default_ic_smoother() { return SmootherConfig{9, 3, 1}; }

/// dQ/dV on a uniform voltage grid: linear interpolation of Q(V), then the SG
/// first derivative. Discharge curves are sign-flipped.
inline IcCurve incremental_capacity(const RptRecord& rpt, double dv, const SmootherConfig& cfg) {
    if (!(dv > 0.0)) throw ConfigError("voltage step must be positive");
    if (rpt.voltage_v.size() != rpt.capacity_ah.size() || rpt.voltage_v.size() < 2) {
        throw DomainError("RPT voltage and capacity columns are inconsistent");
    }
    std::vector<std::pair<double, double>> pts;
    pts.reserve(rpt.voltage_v.size());
    for (std::size_t i = 0; i < rpt.voltage_v.size(); ++i) {
        pts.emplace_back(rpt.voltage_v[i], rpt.capacity_ah[i]);
    }
    std::stable_sort(pts.begin(), pts.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<double> v;
    std::vector<double> q;
    for (std::size_t i = 0; i < pts.size();) {
        std::size_t j = i;
        double sum = 0.0;
        while (j < pts.size() && pts[j].first == pts[i].first) sum += pts[j++].second;
        v.push_back(pts[i].first);
        q.push_back(sum / static_cast<double>(j - i));
        i = j;
    }
    const double span = v.back() - v.front();
    if (v.size() < 2 || span < static_cast<double>(kMinIcGridSpan) * dv * (1.0 - 1e-9)) {
        throw DomainError("RPT voltage span " + std::to_string(span) + " V is below 50 grid steps");
    }
    const auto count = static_cast<std::size_t>(std::floor(span / dv * (1.0 + 1e-12))) + 1;
    IcCurve ic;
    ic.rpt_index = rpt.rpt_index;
    ic.cycle_at_rpt = rpt.cycle_at_rpt;
    ic.direction = rpt.direction;
    ic.voltage_v.resize(count);
    std::vector<double> qgrid(count);
    std::size_t seg = 0;
    for (std::size_t i = 0; i < count; ++i) {
        const double x = std::min(v.front() + static_cast<double>(i) * dv, v.back());
        ic.voltage_v[i] = v.front() + static_cast<double>(i) * dv;
        while (seg + 2 < v.size() && v[seg + 1] < x) ++seg;
        const double t = (x - v[seg]) / (v[seg + 1] - v[seg]);
        qgrid[i] = q[seg] + t * (q[seg + 1] - q[seg]);
    }
    SmootherConfig c = cfg;
    c.max_deriv = std::max(c.max_deriv, 1);
    ic.dq_dv = savgol_filter(qgrid, c, 1, dv);
    if (rpt.direction == SweepDirection::discharge) {
        for (double& d : ic.dq_dv) d = -d;
    }
    return ic;
}

/// Largest local maximum of dQ/dV inside [v_min, v_max]. Plateaus count as one
/// maximum located at their lowest voltage; equal heights resolve to the lower voltage.
inline IcPeak largest_peak(const IcCurve& ic, const VoltageWindow& window) {
    const auto& v = ic.voltage_v;
    const auto& y = ic.dq_dv;
    std::size_t lo = v.size();
    std::size_t hi = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] >= window.v_min - 1e-12 && v[i] <= window.v_max + 1e-12) {
            lo = std::min(lo, i);
            hi = i;
        }
    }
    if (lo >= v.size() || hi < lo + 2) {
        throw DomainError("voltage window holds fewer than 3 grid points");
    }
    IcPeak best;
    bool found = false;
    for (std::size_t i = lo + 1; i < hi;) {
        std::size_t j = i;
        while (j + 1 < hi && y[j + 1] == y[i]) ++j;
        if (y[i - 1] < y[i] && y[j + 1] < y[i] && (!found || y[i] > best.amplitude)) {
            best = {v[i], y[i], i, true};
            found = true;
        }
        i = j + 1;
    }
    if (!found) {
        std::size_t arg = lo;
        for (std::size_t i = lo + 1; i <= hi; ++i) {
            if (y[i] > y[arg]) arg = i;
        }
        best = {v[arg], y[arg], arg, false};
    }
    return best;
}

inline IcPeak largest_peak(const IcCurve& ic, double v_min, double v_max) {
    return largest_peak(ic, VoltageWindow{v_min, v_max});
}

/// Largest IC peak of each RPT, in rpt_index order.
inline PeakTrack peak_trajectory(std::span<const RptRecord> rpts, double dv,
                                 const SmootherConfig& cfg, const VoltageWindow& window) {
    if (rpts.size() < 2) {
        throw InsufficientDataError("peak tracking needs at least 2 RPTs");
    }
    std::vector<const RptRecord*> order;
    for (const auto& r : rpts) order.push_back(&r);
    std::stable_sort(order.begin(), order.end(),
                     [](const RptRecord* a, const RptRecord* b) { return a->rpt_index < b->rpt_index; });
    PeakTrack track;
    for (const RptRecord* r : order) {
        if (!track.empty() && track.back().rpt_index == r->rpt_index) {
            throw DomainError("duplicate rpt_index " + std::to_string(r->rpt_index));
        }
        const auto peak = largest_peak(incremental_capacity(*r, dv, cfg), window);
        track.push_back({r->rpt_index, r->cycle_at_rpt, peak.v_peak, peak.amplitude, peak.interior});
    }
    return track;
}

} // namespace capfade
