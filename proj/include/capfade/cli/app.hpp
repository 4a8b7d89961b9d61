#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "capfade/errors.hpp"
#include "capfade/cli/config.hpp"
#include "capfade/cli/json_writer.hpp"
#include "capfade/cli/pipeline.hpp"
#include "capfade/cli/svg.hpp"

#ifndef CAPFADE_VERSION
#define CAPFADE_VERSION "0.1.0"
#endif

namespace capfade::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUser = 2;
inline constexpr int kSchemaVersion = 1;

struct Options {
    std::string config_path;
    std::optional<std::string> input;
    std::optional<std::string> manifest;
    std::optional<std::string> output;
    std::optional<std::string> svg;
    std::optional<double> nominal_ah;
    std::optional<std::string> window;
    std::optional<double> overlap;
    std::optional<double> dv;
    std::string cell_id;
    std::string knee_report;
    std::size_t segments = 0;
    bool raw = false;
    bool series = false;
};

inline AnalysisConfig resolve_config(const Options& o) {
    AnalysisConfig c = o.config_path.empty() ? AnalysisConfig{} : load_config(o.config_path);
    if (o.input) c.input = *o.input;
    if (o.manifest) c.manifest = *o.manifest;
    if (o.output) c.output = *o.output;
    if (o.svg) c.svg = *o.svg;
    if (o.nominal_ah) c.nominal_ah = *o.nominal_ah;
    if (o.window) c.welch_window = parse_window_kind(*o.window);
    if (o.overlap) c.welch_overlap = *o.overlap;
    if (o.dv) c.ica_dv = *o.dv;
    c.validate();
    return c;
}

inline std::string resolve_cell_id(const Options& o, const AnalysisConfig& c) {
    if (!o.cell_id.empty()) return o.cell_id;
    if (!c.input.empty()) return std::filesystem::path(c.input).stem().string();
    return "";
}

inline Json envelope(const std::string& command, const std::string& cell_id) {
    Json j;
    j["schema_version"] = kSchemaVersion;
    j["software"] = Json{{"name", "capfade"}, {"version", CAPFADE_VERSION}};
    j["command"] = command;
    j["cell_id"] = cell_id;
    return j;
}

inline void finish(Json& doc, const AnalysisConfig& c, const std::vector<std::string>& warnings) {
    doc["config"] = to_json(c);
    doc["warnings"] = warnings;
}

inline std::string error_text(const std::string& kind, const std::string& message, int code) {
    Json j;
    j["error"] = Json{{"kind", kind}, {"message", message}, {"exit_code", code}};
    return to_text(j);
}

struct Output {
    Json doc;
    std::vector<Panel> panels;
};

inline void require_input(const AnalysisConfig& c) {
    if (c.input.empty()) throw ConfigError("no capacity input given (use --input)");
}

inline PhasePartition partition_from_report(const std::string& path, const CurvatureSeries& curv) {
    return with_context(path, [&] {
        Json j;
        try {
            j = Json::parse(read_text(path));
        } catch (const Json::parse_error& e) {
            throw ConfigError(std::string("malformed knee report: ") + e.what());
        }
        if (!j.is_object() || !j.contains("knee") || !j["knee"].is_object()) {
            throw ConfigError("knee report has no 'knee' section");
        }
        const Json& k = j["knee"];
        for (const char* key : {"onset_index", "knee_index", "samples"}) {
            if (!k.contains(key) || !k[key].is_number_integer()) {
                throw ConfigError(std::string("knee report lacks integer '") + key + "'");
            }
        }
        if (k["samples"].get<long>() != static_cast<long>(curv.kappa.size())) {
            throw DomainError("knee report was computed on a different number of samples");
        }
        PhasePartition p;
        p.onset_index = k["onset_index"].get<long>();
        p.knee_index = k["knee_index"].get<long>();
        const long n = static_cast<long>(curv.kappa.size());
        if (!(0 < p.onset_index && p.onset_index < p.knee_index && p.knee_index < n)) {
            throw DomainError("knee report indices do not fit the series");
        }
        p.onset_cycle = curv.cycle[static_cast<std::size_t>(p.onset_index)];
        p.knee_cycle = curv.cycle[static_cast<std::size_t>(p.knee_index)];
        return p;
    });
}

inline Output cmd_knee(const Options& o, const AnalysisConfig& c) {
    require_input(c);
    const std::string cell = resolve_cell_id(o, c);
    const auto k = analyze_knee(load_capacity(c.input, cell, c.nominal_ah), c);
    Output out{envelope("knee", cell), knee_panels(k, cell)};
    out.doc["knee"] = knee_json(k, o.series);
    finish(out.doc, c, {});
    return out;
}

inline Output cmd_psd(const Options& o, const AnalysisConfig& c) {
    require_input(c);
    const std::string cell = resolve_cell_id(o, c);
    std::vector<std::string> warnings;
    Output out{envelope("psd", cell), {}};
    if (o.raw) {
        const auto sig = load_raw_signal(c.input);
        WelchConfig w = c.welch();
        if (o.segments > 0) w.segment_len = tiling_segment_len(sig.x.size(), o.segments, w.overlap);
        else if (w.segment_len > sig.x.size()) w.segment_len = sig.x.size();
        const auto est = welch_psd(sig.x, w, sig.dt);
        Json j;
        j["mode"] = "signal";
        j["samples"] = sig.x.size();
        j["spectrum"] = spectrum_json(est);
        out.doc["psd"] = j;
        Panel p{"PSD " + cell, "frequency (1/cycle)", "PSD", true, true, {}, {}};
        p.traces.push_back({"", est.freq, est.density, palette(0), false});
        out.panels.push_back(p);
    } else {
        const auto raw = load_capacity(c.input, cell, c.nominal_ah);
        KneeAnalysis k{raw.is_uniform() ? raw : resample_uniform(raw, c.resample_step), !raw.is_uniform(),
                       {}, {}, {}, {}};
        k.smoother = c.smoother_for(k.series.size());
        k.curvature = approximate_curvature(k.series, k.smoother);
        k.partition = o.knee_report.empty() ? identify_knee(k.curvature, c.segmentation())
                                            : partition_from_report(o.knee_report, k.curvature);
        const auto phases = phase_spectra(k.curvature, k.partition, c.welch(), o.segments);
        Json j = psd_json(k.curvature, phases, o.segments, warnings);
        j["onset_index"] = k.partition.onset_index;
        j["knee_index"] = k.partition.knee_index;
        out.doc["psd"] = j;
        out.panels.push_back(psd_panel(phases, cell));
    }
    finish(out.doc, c, warnings);
    return out;
}

inline Output cmd_ica(const Options& o, const AnalysisConfig& c) {
    if (c.manifest.empty()) throw ConfigError("no RPT manifest given (use --manifest)");
    std::vector<std::string> warnings;
    const auto a = analyze_ica(load_manifest(c.manifest), c);
    Output out{envelope("ica", resolve_cell_id(o, c)), ica_panels(a, std::nullopt)};
    out.doc["ica"] = ica_json(a, c, warnings);
    finish(out.doc, c, warnings);
    return out;
}

// Analysis failures (flat curvature, too little data, ...) degrade to a null
// section plus a warning; unreadable inputs and bad configuration still abort.
inline bool recoverable(const Error& e) {
    const std::string kind = e.kind();
    return kind == "degenerate_input" || kind == "insufficient_data" || kind == "domain_error";
}

inline Output cmd_report(const Options& o, const AnalysisConfig& c) {
    if (c.input.empty() && c.manifest.empty()) {
        throw ConfigError("report needs --input, --manifest or both");
    }
    const std::string cell = resolve_cell_id(o, c);
    std::vector<std::string> warnings;
    Output out{envelope("report", cell), {}};
    std::optional<PhasePartition> part;
    bool any = false;

    out.doc["knee"] = nullptr;
    out.doc["psd"] = nullptr;
    out.doc["ica"] = nullptr;
    if (c.input.empty()) {
        warnings.push_back("knee: no capacity input supplied");
        warnings.push_back("psd: no capacity input supplied");
    } else {
        const auto raw = load_capacity(c.input, cell, c.nominal_ah);
        try {
            const auto k = analyze_knee(raw, c);
            part = k.partition;
            out.doc["knee"] = knee_json(k, o.series);
            auto panels = knee_panels(k, cell);
            out.panels.insert(out.panels.end(), panels.begin(), panels.end());
            any = true;
            try {
                const auto phases = phase_spectra(k.curvature, k.partition, c.welch(), o.segments);
                out.doc["psd"] = psd_json(k.curvature, phases, o.segments, warnings);
                out.panels.push_back(psd_panel(phases, cell));
            } catch (const Error& e) {
                if (!recoverable(e)) throw;
                warnings.push_back(std::string("psd: ") + e.kind() + ": " + e.what());
            }
        } catch (const Error& e) {
            if (!recoverable(e)) throw;
            warnings.push_back(std::string("knee: ") + e.kind() + ": " + e.what());
            warnings.push_back("psd: skipped, no phase partition");
        }
    }
    if (c.manifest.empty()) {
        warnings.push_back("ica: no RPT manifest supplied");
    } else {
        auto rpts = load_manifest(c.manifest);
        try {
            const auto a = analyze_ica(std::move(rpts), c);
            out.doc["ica"] = ica_json(a, c, warnings);
            auto panels = ica_panels(a, part);
            out.panels.insert(out.panels.end(), panels.begin(), panels.end());
            any = true;
        } catch (const Error& e) {
            if (!recoverable(e)) throw;
            warnings.push_back(std::string("ica: ") + e.kind() + ": " + e.what());
        }
    }
    if (!any) {
        throw DegenerateInputError("no section of the report could be computed: " +
                                   (warnings.empty() ? std::string() : warnings.front()));
    }
    finish(out.doc, c, warnings);
    return out;
}

/// Entry point shared by the executable and the tests. Returns the exit code:
/// 0 success, 1 internal error, 2 user or input error.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Capacity-fade knee detection, phase spectra and incremental-capacity tracking",
                 "capfade"};
    app.set_version_flag("--version", std::string(CAPFADE_VERSION));
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* s) {
        s->add_option("-i,--input", o.input, "capacity CSV (cycle,capacity_ah)");
        s->add_option("--nominal-ah", o.nominal_ah, "nominal capacity in Ah (default 5)");
        s->add_option("-c,--config", o.config_path, "flat JSON config file");
        s->add_option("-o,--output", o.output, "write the JSON report here instead of stdout");
        s->add_option("--svg", o.svg, "also write an SVG figure");
        s->add_option("--cell-id", o.cell_id, "cell label (default: input file stem)");
    };
    auto spectral = [&](CLI::App* s) {
        s->add_option("--window", o.window, "Welch window: hann or rect");
        s->add_option("--overlap", o.overlap, "Welch segment overlap in [0, 1)");
        s->add_option("--segments", o.segments, "segments per phase (sets the segment length)");
    };

    auto* knee = app.add_subcommand("knee", "knee-onset and knee from a capacity fade curve");
    common(knee);
    knee->add_flag("--series", o.series, "include curvature and arc-curve arrays");

    auto* psd = app.add_subcommand("psd", "Welch PSD of the curvature in each life phase");
    common(psd);
    spectral(psd);
    psd->add_option("--knee-report", o.knee_report, "reuse the partition from a knee report");
    psd->add_flag("--raw", o.raw, "treat the value column as the signal (no curvature, one spectrum)");

    auto* ica = app.add_subcommand("ica", "incremental-capacity curves and largest-peak track");
    common(ica);
    ica->add_option("--manifest", o.manifest, "JSON manifest listing RPT CSV files");
    ica->add_option("--dv", o.dv, "voltage grid step in V (default 0.005)");

    auto* report = app.add_subcommand("report", "knee, phase PSD and ICA bundled in one report");
    common(report);
    spectral(report);
    report->add_option("--manifest", o.manifest, "JSON manifest listing RPT CSV files");
    report->add_option("--dv", o.dv, "voltage grid step in V (default 0.005)");
    report->add_flag("--series", o.series, "include curvature and arc-curve arrays");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e, out, err);
        err << error_text("usage_error", e.what(), kExitUser);
        return kExitUser;
    }

    try {
        const AnalysisConfig cfg = resolve_config(o);
        Output result;
        if (app.got_subcommand(knee)) result = cmd_knee(o, cfg);
        else if (app.got_subcommand(psd)) result = cmd_psd(o, cfg);
        else if (app.got_subcommand(ica)) result = cmd_ica(o, cfg);
        else result = cmd_report(o, cfg);

        const std::string text = to_text(result.doc);
        if (cfg.output.empty()) out << text;
        else write_text(cfg.output, text);
        if (!cfg.svg.empty()) write_text(cfg.svg, render_svg(result.panels));
        return kExitOk;
    } catch (const Error& e) {
        err << error_text(e.kind(), e.what(), kExitUser);
        return kExitUser;
    } catch (const std::exception& e) {
        err << error_text("internal_error", e.what(), kExitInternal);
        return kExitInternal;
    }
}

} // namespace capfade::cli
