#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "capfade/curvature.hpp"
#include "capfade/dataset_io.hpp"
#include "capfade/errors.hpp"
#include "capfade/ica.hpp"
#include "capfade/preprocess.hpp"
#include "capfade/segmentation.hpp"
#include "capfade/spectral.hpp"
#include "capfade/cli/config.hpp"
#include "capfade/cli/json_writer.hpp"
#include "capfade/cli/svg.hpp"

namespace capfade::cli {

// Keeps the kind of a library error while prefixing where it happened.
class ContextError : public Error {
public:
    ContextError(const Error& cause, const std::string& context)
        : Error(context + ": " + cause.what()), kind_(cause.kind()) {}
    const char* kind() const noexcept override { return kind_.c_str(); }

private:
    std::string kind_;
};

template <class F>
auto with_context(const std::string& context, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const Error& e) {
        throw ContextError(e, context);
    }
}

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path + ": cannot open file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path + ": cannot write file");
    out << text;
    if (!out) throw IoError(path + ": write failed");
}

// ---- knee ---------------------------------------------------------------

inline CapacitySeries load_capacity(const std::string& path, const std::string& cell_id,
                                    double nominal_ah) {
    const std::string text = read_text(path);
    return with_context(path, [&] { return parse_capacity_csv(text, cell_id, nominal_ah); });
}

struct KneeAnalysis {
    CapacitySeries series;  // on the analysis grid
    bool resampled = false;
    SmootherConfig smoother;
    std::vector<double> soh;
    CurvatureSeries curvature;
    PhasePartition partition;
};

inline KneeAnalysis analyze_knee(const CapacitySeries& raw, const AnalysisConfig& cfg) {
    const bool resample = !raw.is_uniform();
    KneeAnalysis k{resample ? resample_uniform(raw, cfg.resample_step) : raw, resample, {}, {}, {}, {}};
    k.smoother = cfg.smoother_for(k.series.size());
    k.soh = normalize(k.series);
    k.curvature = approximate_curvature(k.series, k.smoother);
    k.partition = identify_knee(k.curvature, cfg.segmentation());
    return k;
}

inline Json knee_json(const KneeAnalysis& k, bool include_series) {
    const auto& part = k.partition;
    const auto& cyc = k.curvature.cycle;
    const long n = static_cast<long>(cyc.size());
    Json j;
    j["onset_cycle"] = part.onset_cycle;
    j["knee_cycle"] = part.knee_cycle;
    j["onset_index"] = part.onset_index;
    j["knee_index"] = part.knee_index;
    j["samples"] = n;
    j["grid_step"] = k.curvature.dt;
    j["resampled"] = k.resampled;
    const std::array<long, 4> edges{0, part.onset_index, part.knee_index, n};
    Json phases = Json::array();
    for (int p = 0; p < 3; ++p) {
        const auto b = static_cast<std::size_t>(edges[static_cast<std::size_t>(p)]);
        const auto e = static_cast<std::size_t>(edges[static_cast<std::size_t>(p) + 1]);
        Json ph;
        ph["phase"] = p + 1;
        ph["first_cycle"] = cyc[b];
        ph["last_cycle"] = cyc[e - 1];
        ph["samples"] = e - b;
        phases.push_back(ph);
    }
    j["phases"] = phases;
    Json resolved;
    resolved["smoother_window_length"] = k.smoother.window_length;
    resolved["smoother_poly_order"] = k.smoother.poly_order;
    resolved["subsequence_length"] = part.m;
    resolved["exclusion"] = default_exclusion(part.m);
    resolved["regime_exclusion"] = part.regime_exclusion;
    j["resolved"] = resolved;
    if (include_series) {
        Json s;
        s["cycle"] = cyc;
        s["soh"] = k.soh;
        s["kappa"] = k.curvature.kappa;
        s["cac"] = part.cac;
        j["series"] = s;
    }
    return j;
}

inline std::vector<Panel> knee_panels(const KneeAnalysis& k, const std::string& cell_id) {
    const auto& part = k.partition;
    const std::vector<std::pair<double, std::string>> marks{{part.onset_cycle, "onset"},
                                                            {part.knee_cycle, "knee"}};
    Panel soh{"Capacity fade " + cell_id, "cycle", "state of health", false, false, {}, marks};
    soh.traces.push_back({"", k.curvature.cycle, k.soh, palette(0), false});
    Panel kap{"Approximated curvature", "cycle", "curvature (1/cycle)", false, false, {}, marks};
    kap.traces.push_back({"", k.curvature.cycle, k.curvature.kappa, palette(0), false});
    Panel cac{"Corrected arc curve", "cycle", "CAC", false, false, {}, marks};
    const std::vector<double> cac_x(k.curvature.cycle.begin(),
                                    k.curvature.cycle.begin() + static_cast<std::ptrdiff_t>(part.cac.size()));
    cac.traces.push_back({"", cac_x, part.cac, palette(1), false});
    return {soh, kap, cac};
}

// ---- psd ----------------------------------------------------------------

/// Segment length that lets `segments` windows at the given overlap tile `len` samples.
inline std::size_t tiling_segment_len(std::size_t len, std::size_t segments, double overlap) {
    const double span = 1.0 + static_cast<double>(segments - 1) * (1.0 - overlap);
    return static_cast<std::size_t>(std::floor(static_cast<double>(len) / span));
}

inline std::array<PhaseSpectrum, 3> phase_spectra(const CurvatureSeries& curv, const PhasePartition& part,
                                                  const WelchConfig& welch, std::size_t segments) {
    if (segments == 0) return phase_psd(curv, part, welch);
    const std::size_t n = curv.kappa.size();
    if (!(part.onset_index > 0 && part.onset_index < part.knee_index &&
          static_cast<std::size_t>(part.knee_index) <= n)) {
        throw DomainError("phase partition does not fit the series");
    }
    const std::array<std::size_t, 4> edges{0, static_cast<std::size_t>(part.onset_index),
                                           static_cast<std::size_t>(part.knee_index), n};
    std::array<PhaseSpectrum, 3> out;
    for (std::size_t p = 0; p < 3; ++p) {
        auto& ph = out[p];
        ph.phase = static_cast<int>(p) + 1;
        ph.begin = edges[p];
        ph.end = edges[p + 1];
        const std::size_t len = ph.end - ph.begin;
        WelchConfig local = welch;
        local.segment_len = tiling_segment_len(len, segments, welch.overlap);
        if (len < kMinPhaseSamples || local.segment_len < 4) {
            ph.error = "phase " + std::to_string(p + 1) + " has " + std::to_string(len) +
                       " samples, too few for " + std::to_string(segments) + " segments";
            continue;
        }
        ph.psd = welch_psd(std::span<const double>(curv.kappa.data() + ph.begin, len), local, curv.dt);
    }
    return out;
}

inline Json spectrum_json(const PsdEstimate& est) {
    Json j;
    j["segment_len"] = est.segment_len;
    j["segments"] = est.segments;
    j["df"] = est.df;
    j["total_power"] = est.total_power;
    std::size_t peak = est.density.size() > 1 ? 1 : 0;
    for (std::size_t i = peak; i < est.density.size(); ++i) {
        if (est.density[i] > est.density[peak]) peak = i;
    }
    j["peak_frequency"] = est.freq.empty() ? 0.0 : est.freq[peak];
    j["peak_density"] = est.density.empty() ? 0.0 : est.density[peak];
    j["freq"] = est.freq;
    j["density"] = est.density;
    return j;
}

inline Json psd_json(const CurvatureSeries& curv, const std::array<PhaseSpectrum, 3>& phases,
                     std::size_t segments, std::vector<std::string>& warnings) {
    Json j;
    j["mode"] = "curvature";
    j["segments_per_phase"] = segments;
    Json arr = Json::array();
    for (const auto& ph : phases) {
        Json e;
        e["phase"] = ph.phase;
        e["first_cycle"] = curv.cycle[ph.begin];
        e["last_cycle"] = curv.cycle[ph.end - 1];
        e["samples"] = ph.end - ph.begin;
        if (ph.psd) {
            e["spectrum"] = spectrum_json(*ph.psd);
        } else {
            e["spectrum"] = nullptr;
            warnings.push_back("psd: phase " + std::to_string(ph.phase) + " omitted: " + ph.error);
        }
        arr.push_back(e);
    }
    j["phases"] = arr;
    return j;
}

inline Panel psd_panel(const std::array<PhaseSpectrum, 3>& phases, const std::string& cell_id) {
    Panel p{"Curvature PSD by phase " + cell_id, "frequency (1/cycle)", "PSD", true, true, {}, {}};
    for (const auto& ph : phases) {
        if (!ph.psd) continue;
        p.traces.push_back({"phase " + std::to_string(ph.phase), ph.psd->freq, ph.psd->density,
                            palette(static_cast<std::size_t>(ph.phase - 1)), false});
    }
    return p;
}

// Signal mode: the value column itself, no curvature or phases.
struct RawSignal {
    std::vector<double> x;
    double dt = 1.0;
};

inline RawSignal load_raw_signal(const std::string& path) {
    const std::string text = read_text(path);
    return with_context(path, [&] {
        std::istringstream in(text);
        auto rows = capfade::detail::read_two_column_csv(in, "cycle", "capacity_ah");
        if (rows.size() < kMinPhaseSamples) throw InsufficientDataError("signal needs at least 8 samples");
        RawSignal s;
        const double step = rows[1].a - rows[0].a;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (i > 0 && std::abs((rows[i].a - rows[i - 1].a) - step) > 1e-9 * std::abs(step)) {
                throw DomainError("signal mode needs uniformly spaced cycles");
            }
            s.x.push_back(rows[i].b);
        }
        if (!(step > 0.0)) throw DomainError("cycles must increase");
        s.dt = step;
        return s;
    });
}

// ---- ica ----------------------------------------------------------------

struct ManifestEntry {
    std::string path;  // as written in the manifest
    int rpt_index = 0;
    double cycle_at_rpt = 0.0;
    SweepDirection direction = SweepDirection::discharge;
};

inline std::vector<ManifestEntry> parse_manifest(const std::string& text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ConfigError(std::string("malformed manifest JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("manifest must be a JSON object with an 'rpts' array");
    for (const auto& [key, v] : j.items()) {
        (void)v;
        if (key != "rpts") throw ConfigError("unknown manifest key '" + key + "'");
    }
    if (!j.contains("rpts") || !j["rpts"].is_array()) throw ConfigError("manifest needs an 'rpts' array");
    std::vector<ManifestEntry> out;
    std::size_t i = 0;
    for (const auto& e : j["rpts"]) {
        const std::string where = "manifest entry " + std::to_string(i++);
        if (!e.is_object()) throw ConfigError(where + " must be an object");
        ManifestEntry m;
        bool has_path = false, has_index = false, has_cycle = false, has_dir = false;
        for (const auto& [key, v] : e.items()) {
            if (key == "path" && v.is_string()) {
                m.path = v.get<std::string>();
                has_path = true;
            } else if (key == "rpt_index" && v.is_number_integer() && v.get<long>() >= 0) {
                m.rpt_index = v.get<int>();
                has_index = true;
            } else if (key == "cycle_at_rpt" && v.is_number() && v.get<double>() >= 0.0) {
                m.cycle_at_rpt = v.get<double>();
                has_cycle = true;
            } else if (key == "direction" && v.is_string()) {
                m.direction = with_context(where, [&] { return parse_direction(v.get<std::string>()); });
                has_dir = true;
            } else {
                throw ConfigError(where + ": unexpected or invalid field '" + key + "'");
            }
        }
        if (!(has_path && has_index && has_cycle && has_dir)) {
            throw ConfigError(where + ": needs path, rpt_index, cycle_at_rpt and direction");
        }
        out.push_back(std::move(m));
    }
    return out;
}

struct LoadedRpt {
    ManifestEntry entry;
    RptRecord record;
};

inline std::vector<LoadedRpt> load_manifest(const std::string& manifest_path) {
    const auto entries = with_context(manifest_path, [&] { return parse_manifest(read_text(manifest_path)); });
    if (entries.empty()) throw InsufficientDataError(manifest_path + ": manifest lists no RPT files");
    const auto base = std::filesystem::path(manifest_path).parent_path();
    std::vector<LoadedRpt> out;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        const std::string where = "manifest entry " + std::to_string(i) + " (" + e.path + ")";
        const auto file = std::filesystem::path(e.path).is_absolute() ? std::filesystem::path(e.path)
                                                                       : base / e.path;
        out.push_back({e, with_context(where, [&] {
                           return parse_rpt_csv(read_text(file.string()), e.rpt_index, e.cycle_at_rpt,
                                                e.direction);
                       })});
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const LoadedRpt& a, const LoadedRpt& b) { return a.entry.rpt_index < b.entry.rpt_index; });
    return out;
}

struct IcaAnalysis {
    std::vector<LoadedRpt> rpts;
    std::vector<IcCurve> curves;
    PeakTrack track;
};

inline IcaAnalysis analyze_ica(std::vector<LoadedRpt> rpts, const AnalysisConfig& cfg) {
    IcaAnalysis a;
    a.rpts = std::move(rpts);
    std::vector<RptRecord> records;
    for (const auto& r : a.rpts) records.push_back(r.record);
    a.track = peak_trajectory(records, cfg.ica_dv, cfg.ic_smoother(), cfg.voltage_window());
    for (std::size_t i = 0; i < a.rpts.size(); ++i) {
        a.curves.push_back(with_context("RPT " + std::to_string(records[i].rpt_index), [&] {
            return incremental_capacity(records[i], cfg.ica_dv, cfg.ic_smoother());
        }));
    }
    return a;
}

inline Json ica_json(const IcaAnalysis& a, const AnalysisConfig& cfg, std::vector<std::string>& warnings) {
    Json j;
    j["dv"] = cfg.ica_dv;
    j["smoother_window_length"] = cfg.ica_window_length;
    j["smoother_poly_order"] = cfg.ica_poly_order;
    Json curves = Json::array();
    for (std::size_t i = 0; i < a.curves.size(); ++i) {
        Json c;
        c["rpt_index"] = a.curves[i].rpt_index;
        c["cycle_at_rpt"] = a.curves[i].cycle_at_rpt;
        c["direction"] = std::string(to_string(a.curves[i].direction));
        c["source"] = a.rpts[i].entry.path;
        c["voltage_v"] = a.curves[i].voltage_v;
        c["dq_dv"] = a.curves[i].dq_dv;
        curves.push_back(c);
    }
    j["curves"] = curves;
    Json track = Json::array();
    std::size_t best = 0;
    for (std::size_t i = 0; i < a.track.size(); ++i) {
        const auto& p = a.track[i];
        Json t;
        t["rpt_index"] = p.rpt_index;
        t["cycle_at_rpt"] = p.cycle_at_rpt;
        t["v_peak"] = p.v_peak;
        t["amplitude"] = p.amplitude;
        t["interior"] = p.interior;
        track.push_back(t);
        if (!p.interior) {
            warnings.push_back("ica: RPT " + std::to_string(p.rpt_index) +
                               " has no interior maximum in the voltage window");
        }
        if (p.amplitude > a.track[best].amplitude) best = i;
    }
    j["track"] = track;
    Json sat;
    sat["rpt_index"] = a.track[best].rpt_index;
    sat["cycle_at_rpt"] = a.track[best].cycle_at_rpt;
    sat["amplitude"] = a.track[best].amplitude;
    j["max_amplitude"] = sat;
    return j;
}

inline std::vector<Panel> ica_panels(const IcaAnalysis& a, const std::optional<PhasePartition>& part) {
    Panel ic{"Incremental capacity curves", "voltage (V)", "dQ/dV (Ah/V)", false, false, {}, {}};
    Trace peaks{"largest peak", {}, {}, "#d62728", true};
    for (std::size_t i = 0; i < a.curves.size(); ++i) {
        ic.traces.push_back({"RPT " + std::to_string(a.curves[i].rpt_index), a.curves[i].voltage_v,
                             a.curves[i].dq_dv, palette(i), false});
    }
    Panel amp{"Largest-peak amplitude", "cycle", "amplitude (Ah/V)", false, false, {}, {}};
    Trace line{"", {}, {}, palette(0), false};
    for (const auto& p : a.track) {
        peaks.x.push_back(p.v_peak);
        peaks.y.push_back(p.amplitude);
        line.x.push_back(p.cycle_at_rpt);
        line.y.push_back(p.amplitude);
    }
    ic.traces.push_back(peaks);
    Trace squares = line;
    squares.markers = true;
    squares.color = "#d62728";
    amp.traces.push_back(line);
    amp.traces.push_back(squares);
    if (part) {
        amp.vlines = {{part->onset_cycle, "onset"}, {part->knee_cycle, "knee"}};
    }
    return {ic, amp};
}

} // namespace capfade::cli
