#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>

#include "capfade/errors.hpp"
#include "capfade/ica.hpp"
#include "capfade/preprocess.hpp"
#include "capfade/segmentation.hpp"
#include "capfade/spectral.hpp"
#include "capfade/cli/json_writer.hpp"

namespace capfade::cli {

/// Everything a run depends on. Zero means "pick from the data" for the
/// smoother window, subsequence length and Welch segment length.
struct AnalysisConfig {
    double nominal_ah = 5.0;
    double resample_step = 1.0;

    int smoother_window_length = 0;
    int smoother_poly_order = 3;

    int segmentation_m = 0;
    int segmentation_exclusion_factor = 5;
    int segmentation_threads = 1;

    long welch_segment_len = 0;
    double welch_overlap = 0.5;
    WindowKind welch_window = WindowKind::hann;
    bool welch_detrend = true;

    double ica_dv = 0.005;
    int ica_window_length = 9;
    int ica_poly_order = 3;
    std::optional<double> ica_v_min;
    std::optional<double> ica_v_max;

    std::string input;
    std::string manifest;
    std::string output;
    std::string svg;

    friend bool operator==(const AnalysisConfig&, const AnalysisConfig&) = default;

    void validate() const {
        if (!(nominal_ah > 0.0) || !std::isfinite(nominal_ah)) {
            throw ConfigError("nominal_ah must be a positive number");
        }
        if (!(resample_step > 0.0) || !std::isfinite(resample_step)) {
            throw ConfigError("resample_step must be a positive number");
        }
        if (smoother_poly_order < 2) {
            throw ConfigError("smoother_poly_order must be at least 2 for curvature");
        }
        if (smoother_window_length != 0) smoother_for(smoother_window_length).validate();
        if (segmentation_m != 0 && segmentation_m < 4) {
            throw ConfigError("segmentation_m must be 0 (auto) or at least 4");
        }
        if (segmentation_exclusion_factor < 1) {
            throw ConfigError("segmentation_exclusion_factor must be at least 1");
        }
        if (segmentation_threads < 0) throw ConfigError("segmentation_threads must be non-negative");
        if (welch_segment_len != 0 && welch_segment_len < 4) {
            throw ConfigError("welch_segment_len must be 0 (auto) or at least 4");
        }
        if (!(welch_overlap >= 0.0 && welch_overlap < 1.0)) {
            throw ConfigError("welch_overlap must lie in [0, 1)");
        }
        if (!(ica_dv > 0.0) || !std::isfinite(ica_dv)) throw ConfigError("ica_dv must be positive");
        ic_smoother().validate();
        if (ica_v_min && ica_v_max && !(*ica_v_min < *ica_v_max)) {
            throw ConfigError("ica_v_min must be below ica_v_max");
        }
    }

    SmootherConfig smoother_for(std::size_t n) const {
        SmootherConfig s = default_smoother(n);
        s.poly_order = smoother_poly_order;
        if (smoother_window_length > 0) {
            s.window_length = smoother_window_length;
        } else if (s.window_length < smoother_poly_order + 2) {
            s.window_length = smoother_poly_order + 2 + (smoother_poly_order % 2 == 0 ? 1 : 0);
        }
        s.max_deriv = 2;
        return s;
    }

    SegmentationConfig segmentation() const {
        SegmentationConfig s;
        s.m = segmentation_m;
        s.regime_exclusion_factor = segmentation_exclusion_factor;
        s.threads = static_cast<unsigned>(segmentation_threads);
        return s;
    }

    WelchConfig welch() const {
        WelchConfig w;
        w.segment_len = static_cast<std::size_t>(welch_segment_len);
        w.overlap = welch_overlap;
        w.window = welch_window;
        w.detrend = welch_detrend;
        return w;
    }

    SmootherConfig ic_smoother() const { return SmootherConfig{ica_window_length, ica_poly_order, 1}; }

    VoltageWindow voltage_window() const {
        VoltageWindow w;
        if (ica_v_min) w.v_min = *ica_v_min;
        if (ica_v_max) w.v_max = *ica_v_max;
        return w;
    }
};

inline Json to_json(const AnalysisConfig& c) {
    Json j;
    j["nominal_ah"] = c.nominal_ah;
    j["resample_step"] = c.resample_step;
    j["smoother_window_length"] = c.smoother_window_length;
    j["smoother_poly_order"] = c.smoother_poly_order;
    j["segmentation_m"] = c.segmentation_m;
    j["segmentation_exclusion_factor"] = c.segmentation_exclusion_factor;
    j["segmentation_threads"] = c.segmentation_threads;
    j["welch_segment_len"] = c.welch_segment_len;
    j["welch_overlap"] = c.welch_overlap;
    j["welch_window"] = std::string(to_string(c.welch_window));
    j["welch_detrend"] = c.welch_detrend;
    j["ica_dv"] = c.ica_dv;
    j["ica_window_length"] = c.ica_window_length;
    j["ica_poly_order"] = c.ica_poly_order;
    j["ica_v_min"] = c.ica_v_min ? Json(*c.ica_v_min) : Json(nullptr);
    j["ica_v_max"] = c.ica_v_max ? Json(*c.ica_v_max) : Json(nullptr);
    j["input"] = c.input;
    j["manifest"] = c.manifest;
    j["output"] = c.output;
    j["svg"] = c.svg;
    return j;
}

namespace detail {

inline double number_field(const Json& v, const std::string& key) {
    if (!v.is_number()) throw ConfigError("'" + key + "' must be a number");
    return v.get<double>();
}

inline long integer_field(const Json& v, const std::string& key) {
    if (!v.is_number_integer()) throw ConfigError("'" + key + "' must be an integer");
    return v.get<long>();
}

inline int int_field(const Json& v, const std::string& key) {
    const long x = integer_field(v, key);
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
        throw ConfigError("'" + key + "' is out of range");
    }
    return static_cast<int>(x);
}

inline std::string string_field(const Json& v, const std::string& key) {
    if (!v.is_string()) throw ConfigError("'" + key + "' must be a string");
    return v.get<std::string>();
}

inline std::optional<double> optional_number(const Json& v, const std::string& key) {
    if (v.is_null()) return std::nullopt;
    return number_field(v, key);
}

} // namespace detail

/// Applies the keys present in `j` on top of `base`. Unknown keys are errors.
inline AnalysisConfig config_from_json(const Json& j, AnalysisConfig base = {}) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    using namespace detail;
    AnalysisConfig c = std::move(base);
    for (const auto& [key, v] : j.items()) {
        if (key == "nominal_ah") c.nominal_ah = number_field(v, key);
        else if (key == "resample_step") c.resample_step = number_field(v, key);
        else if (key == "smoother_window_length") c.smoother_window_length = int_field(v, key);
        else if (key == "smoother_poly_order") c.smoother_poly_order = int_field(v, key);
        else if (key == "segmentation_m") c.segmentation_m = int_field(v, key);
        else if (key == "segmentation_exclusion_factor") c.segmentation_exclusion_factor = int_field(v, key);
        else if (key == "segmentation_threads") c.segmentation_threads = int_field(v, key);
        else if (key == "welch_segment_len") c.welch_segment_len = integer_field(v, key);
        else if (key == "welch_overlap") c.welch_overlap = number_field(v, key);
        else if (key == "welch_window") c.welch_window = parse_window_kind(string_field(v, key));
        else if (key == "welch_detrend") {
            if (!v.is_boolean()) throw ConfigError("'welch_detrend' must be true or false");
            c.welch_detrend = v.get<bool>();
        }
        else if (key == "ica_dv") c.ica_dv = number_field(v, key);
        else if (key == "ica_window_length") c.ica_window_length = int_field(v, key);
        else if (key == "ica_poly_order") c.ica_poly_order = int_field(v, key);
        else if (key == "ica_v_min") c.ica_v_min = optional_number(v, key);
        else if (key == "ica_v_max") c.ica_v_max = optional_number(v, key);
        else if (key == "input") c.input = string_field(v, key);
        else if (key == "manifest") c.manifest = string_field(v, key);
        else if (key == "output") c.output = string_field(v, key);
        else if (key == "svg") c.svg = string_field(v, key);
        else throw ConfigError("unknown config key '" + key + "'");
    }
    c.validate();
    return c;
}

inline AnalysisConfig parse_config(const std::string& text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ConfigError(std::string("malformed JSON: ") + e.what());
    }
    return config_from_json(j);
}

inline AnalysisConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path + ": cannot open config file");
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_config(buf.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

} // namespace capfade::cli
