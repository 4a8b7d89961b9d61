#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "capfade/cli/app.hpp"
#include "../support/synthetic.hpp"

using namespace capfade;
using namespace capfade::cli;
namespace fs = std::filesystem;
namespace ct = capfade::testing;

namespace {

struct RunResult {
    int code;
    std::string out;
    std::string err;
};

RunResult run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "capfade");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch_dir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    auto dir = fs::path(::testing::TempDir()) / (std::string("capfade_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write(const fs::path& p, const std::string& text) {
    std::ofstream(p, std::ios::binary) << text;
}

std::string capacity_csv(const std::vector<double>& q) {
    std::string s = "cycle,capacity_ah\n";
    for (std::size_t n = 0; n < q.size(); ++n) s += std::to_string(n) + "," + capfade::detail::format_double(q[n]) + "\n";
    return s;
}

std::string fade_csv(unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.0025);
    std::vector<double> q;
    for (int n = 0; n < 600; ++n) q.push_back(ct::knee_soh(n) * 5.0 + noise(rng));
    return capacity_csv(q);
}

// Discharge RPT whose IC curve is a Gaussian of the given height at `center`.
std::string rpt_csv(double center, double height) {
    const double sigma = 0.035;
    const double area = height * sigma * std::sqrt(2.0 * std::numbers::pi);
    std::string s = "voltage_v,capacity_ah\n";
    auto q_charge = [&](double v) { return area * ct::gaussian_cdf((v - center) / sigma) + 0.3 * (v - 3.0); };
    const double top = q_charge(4.2);
    for (int i = 0; i <= 600; ++i) {
        const double v = 4.2 - 0.002 * i;
        s += capfade::detail::format_double(v) + "," + capfade::detail::format_double(top - q_charge(v)) + "\n";
    }
    return s;
}

Json parse(const std::string& s) { return Json::parse(s); }

} // namespace

TEST(AnalysisConfigTest, RoundTripThroughText) {
    AnalysisConfig c;
    c.nominal_ah = 4.8;
    c.smoother_window_length = 21;
    c.segmentation_m = 30;
    c.welch_overlap = 0.25;
    c.welch_window = WindowKind::rectangular;
    c.welch_detrend = false;
    c.ica_dv = 0.002;
    c.ica_v_min = 3.9;
    c.input = "cells/b.csv";
    EXPECT_EQ(parse_config(to_text(to_json(c))), c);
    EXPECT_EQ(parse_config(to_text(to_json(AnalysisConfig{}))), AnalysisConfig{});
}

TEST(AnalysisConfigTest, PartialFileKeepsDefaults) {
    const auto c = parse_config(R"({"segmentation_m": 25})");
    AnalysisConfig expect;
    expect.segmentation_m = 25;
    EXPECT_EQ(c, expect);
}

TEST(AnalysisConfigTest, RejectsUnknownKeysAndBadValues) {
    EXPECT_THROW(parse_config(R"({"smoother": {"window_length": 11}})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"welch_overlap": "half"})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"welch_overlap": 1.0})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"smoother_window_length": 10})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"smoother_poly_order": 1})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"segmentation_m": 2.5})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"welch_window": "blackman"})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"ica_v_min": 4.1, "ica_v_max": 4.0})"), ConfigError);
    EXPECT_THROW(parse_config("[1, 2]"), ConfigError);
    EXPECT_THROW(parse_config("{"), ConfigError);
}

TEST(JsonText, FixedOrderAndSeventeenDigits) {
    Json j;
    j["z"] = 0.1;
    j["a"] = 3;
    j["nan"] = std::nan("");
    j["list"] = std::vector<double>{1.0, 0.5};
    j["nested"] = Json{{"k", true}};
    EXPECT_EQ(to_text(j),
              "{\n  \"z\": 0.10000000000000001,\n  \"a\": 3,\n  \"nan\": null,\n  \"list\": [1, 0.5],\n"
              "  \"nested\": {\n    \"k\": true\n  }\n}\n");
    const double v = 0.1 + 0.2;
    EXPECT_EQ(parse(to_text(Json{{"v", v}}))["v"].get<double>(), v);
}

TEST(CliKnee, ReportsOrderedPhases) {
    const auto dir = scratch_dir();
    write(dir / "cell.csv", fade_csv(3));
    const auto r = run_cli({"knee", "--input", (dir / "cell.csv").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = parse(r.out);
    EXPECT_EQ(j["schema_version"], 1);
    EXPECT_EQ(j["command"], "knee");
    EXPECT_EQ(j["cell_id"], "cell");
    EXPECT_EQ(j["software"]["version"], CAPFADE_VERSION);
    const auto& k = j["knee"];
    EXPECT_LT(k["onset_cycle"].get<double>(), k["knee_cycle"].get<double>());
    long total = 0;
    for (const auto& ph : k["phases"]) total += ph["samples"].get<long>();
    EXPECT_EQ(total, 600);
    EXPECT_EQ(k["resolved"]["subsequence_length"], 30);
    EXPECT_FALSE(k.contains("series"));
    EXPECT_EQ(config_from_json(j["config"]).input, (dir / "cell.csv").string());
    EXPECT_TRUE(j["warnings"].empty());
}

TEST(CliKnee, SeriesFlagAndIrregularInput) {
    const auto dir = scratch_dir();
    std::string csv = "cycle,capacity_ah\n";
    for (int n = 0; n < 600; n += (n % 7 == 3 ? 2 : 1)) {
        csv += std::to_string(n) + "," + capfade::detail::format_double(5.0 * ct::knee_soh(n)) + "\n";
    }
    write(dir / "irregular.csv", csv);
    const auto r = run_cli({"knee", "-i", (dir / "irregular.csv").string(), "--series", "--cell-id", "X"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = parse(r.out);
    EXPECT_EQ(j["cell_id"], "X");
    EXPECT_TRUE(j["knee"]["resampled"].get<bool>());
    EXPECT_EQ(j["knee"]["series"]["kappa"].size(), j["knee"]["samples"].get<std::size_t>());
}

TEST(CliKnee, LinearFadeIsDegenerate) {
    const auto dir = scratch_dir();
    std::vector<double> q;
    for (int n = 0; n < 300; ++n) q.push_back(5.0 - 0.001 * n);
    write(dir / "linear.csv", capacity_csv(q));
    const auto r = run_cli({"knee", "--input", (dir / "linear.csv").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_TRUE(r.out.empty());
    const auto e = parse(r.err);
    EXPECT_EQ(e["error"]["kind"], "degenerate_input");
    EXPECT_EQ(e["error"]["exit_code"], 2);
}

TEST(CliKnee, InputErrorsAreUserErrors) {
    const auto dir = scratch_dir();
    EXPECT_EQ(run_cli({"knee", "--input", (dir / "missing.csv").string()}).code, 2);
    write(dir / "bad.csv", "cycle,capacity_ah\n0,5\n1,abc\n");
    const auto r = run_cli({"knee", "--input", (dir / "bad.csv").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(parse(r.err)["error"]["kind"], "parse_error");
    EXPECT_NE(r.err.find("line 3"), std::string::npos);
    EXPECT_EQ(run_cli({"knee"}).code, 2);
    EXPECT_EQ(run_cli({"knee", "--bogus"}).code, 2);
    EXPECT_EQ(run_cli({}).code, 2);
    EXPECT_EQ(run_cli({"--help"}).code, 0);
}

TEST(CliPsd, SingleRectangularSegmentOnSine) {
    const auto dir = scratch_dir();
    std::vector<double> x;
    for (int n = 0; n < 2048; ++n) x.push_back(2.0 + std::sin(2.0 * std::numbers::pi * 0.05 * n));
    write(dir / "sine.csv", capacity_csv(x));
    const auto r = run_cli({"psd", "-i", (dir / "sine.csv").string(), "--raw", "--window", "rect",
                            "--overlap", "0", "--segments", "1"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto s = parse(r.out)["psd"]["spectrum"];
    EXPECT_EQ(s["segments"], 1);
    EXPECT_EQ(s["segment_len"], 2048);
    const double df = s["df"].get<double>();
    EXPECT_DOUBLE_EQ(s["peak_frequency"].get<double>(), std::round(0.05 / df) * df);
    // Direct sum of squares of the mean-removed sine.
    double ms = 0.0;
    for (double v : x) ms += (v - 2.0) * (v - 2.0);
    ms /= 2048.0;
    EXPECT_NEAR(s["total_power"].get<double>(), ms, 1e-3 * ms);
}

TEST(CliPsd, OscillatoryMiddlePhaseDominates) {
    const auto dir = scratch_dir();
    std::vector<double> q;
    for (int n = 0; n < 600; ++n) {
        double v = 5.0 - 0.001 * n;
        if (n >= 200 && n < 450) {
            const double envelope = std::pow(std::sin(std::numbers::pi * (n - 200) / 250.0), 2);
            v += 2e-3 * envelope * std::sin(2.0 * std::numbers::pi * (n - 200) / 25.0);
        }
        q.push_back(v);
    }
    write(dir / "osc.csv", capacity_csv(q));
    write(dir / "knee.json", R"({"knee": {"onset_index": 200, "knee_index": 450, "samples": 600}})");
    write(dir / "cfg.json", R"({"smoother_window_length": 9})");
    const auto r = run_cli({"psd", "-i", (dir / "osc.csv").string(), "--knee-report", (dir / "knee.json").string(),
                            "-c", (dir / "cfg.json").string(), "--svg", (dir / "psd.svg").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto phases = parse(r.out)["psd"]["phases"];
    const double p1 = phases[0]["spectrum"]["total_power"].get<double>();
    const double p2 = phases[1]["spectrum"]["total_power"].get<double>();
    const double p3 = phases[2]["spectrum"]["total_power"].get<double>();
    EXPECT_GT(p2, 100.0 * p1);
    EXPECT_GT(p2, 100.0 * p3);
    EXPECT_TRUE(fs::exists(dir / "psd.svg"));
}

TEST(CliPsd, ShortPhaseOmittedWithWarning) {
    const auto dir = scratch_dir();
    write(dir / "cell.csv", fade_csv(5));
    write(dir / "knee.json", R"({"knee": {"onset_index": 4, "knee_index": 300, "samples": 600}})");
    const auto r = run_cli({"psd", "-i", (dir / "cell.csv").string(), "--knee-report", (dir / "knee.json").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = parse(r.out);
    EXPECT_TRUE(j["psd"]["phases"][0]["spectrum"].is_null());
    EXPECT_FALSE(j["psd"]["phases"][1]["spectrum"].is_null());
    ASSERT_EQ(j["warnings"].size(), 1u);
    EXPECT_NE(j["warnings"][0].get<std::string>().find("phase 1"), std::string::npos);
}

TEST(CliIca, TrajectoryFollowsConstruction) {
    const auto dir = scratch_dir();
    Json manifest;
    manifest["rpts"] = Json::array();
    std::vector<double> heights;
    for (int k = 0; k < 10; ++k) {
        heights.push_back(12.0 + 6.0 * std::exp(-0.5 * std::pow((k - 5) / 2.0, 2)));
        const std::string name = "rpt" + std::to_string(k) + ".csv";
        write(dir / name, rpt_csv(4.05 - 0.002 * k, heights.back()));
        manifest["rpts"].push_back(
            Json{{"path", name}, {"rpt_index", k}, {"cycle_at_rpt", 50 * k}, {"direction", "discharge"}});
    }
    write(dir / "manifest.json", manifest.dump());
    const auto r = run_cli({"ica", "--manifest", (dir / "manifest.json").string(), "--svg", (dir / "ica.svg").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = parse(r.out);
    ASSERT_EQ(j["ica"]["curves"].size(), 10u);
    const auto track = j["ica"]["track"];
    for (int k = 0; k < 10; ++k) {
        const double expect = heights[static_cast<std::size_t>(k)] + 0.3;
        EXPECT_NEAR(track[k]["amplitude"].get<double>(), expect, 0.03 * expect);
        EXPECT_NEAR(track[k]["v_peak"].get<double>(), 4.05 - 0.002 * k, 0.005);
    }
    EXPECT_EQ(j["ica"]["max_amplitude"]["rpt_index"], 5);
    EXPECT_TRUE(fs::exists(dir / "ica.svg"));
}

TEST(CliIca, ManifestProblemsAreUserErrors) {
    const auto dir = scratch_dir();
    write(dir / "empty.json", R"({"rpts": []})");
    EXPECT_EQ(run_cli({"ica", "--manifest", (dir / "empty.json").string()}).code, 2);

    write(dir / "r0.csv", rpt_csv(4.05, 10.0));
    write(dir / "missing.json", R"({"rpts": [
        {"path": "r0.csv", "rpt_index": 0, "cycle_at_rpt": 0, "direction": "discharge"},
        {"path": "nope.csv", "rpt_index": 1, "cycle_at_rpt": 50, "direction": "discharge"}]})");
    const auto r = run_cli({"ica", "--manifest", (dir / "missing.json").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("manifest entry 1 (nope.csv)"), std::string::npos);

    write(dir / "extra.json", R"({"rpts": [{"path": "r0.csv", "rpt_index": 0, "cycle_at_rpt": 0,
        "direction": "discharge", "temperature": 25}]})");
    EXPECT_EQ(run_cli({"ica", "--manifest", (dir / "extra.json").string()}).code, 2);

    write(dir / "single.json", R"({"rpts": [{"path": "r0.csv", "rpt_index": 0, "cycle_at_rpt": 0,
        "direction": "discharge"}]})");
    EXPECT_EQ(parse(run_cli({"ica", "--manifest", (dir / "single.json").string()}).err)["error"]["kind"],
              "insufficient_data");
}

TEST(CliReport, CapacityOnlyLeavesIcaNull) {
    const auto dir = scratch_dir();
    write(dir / "cell.csv", fade_csv(11));
    const auto r = run_cli({"report", "--input", (dir / "cell.csv").string(), "--output", (dir / "out.json").string(),
                            "--svg", (dir / "report.svg").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(r.out.empty());
    const auto j = parse(read_text((dir / "out.json").string()));
    EXPECT_TRUE(j["knee"].is_object());
    EXPECT_TRUE(j["psd"].is_object());
    EXPECT_TRUE(j["ica"].is_null());
    ASSERT_FALSE(j["warnings"].empty());
    EXPECT_NE(j["warnings"].back().get<std::string>().find("ica"), std::string::npos);

    const std::string svg = read_text((dir / "report.svg").string());
    EXPECT_EQ(svg.rfind("<?xml", 0), 0u);
    EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

TEST(CliReport, DegenerateCapacityWithRptsStillReports) {
    const auto dir = scratch_dir();
    std::vector<double> q;
    for (int n = 0; n < 300; ++n) q.push_back(5.0 - 0.001 * n);
    write(dir / "linear.csv", capacity_csv(q));
    write(dir / "a.csv", rpt_csv(4.05, 10.0));
    write(dir / "b.csv", rpt_csv(4.04, 12.0));
    write(dir / "m.json", R"({"rpts": [
        {"path": "a.csv", "rpt_index": 0, "cycle_at_rpt": 0, "direction": "discharge"},
        {"path": "b.csv", "rpt_index": 1, "cycle_at_rpt": 100, "direction": "discharge"}]})");
    const auto r = run_cli({"report", "-i", (dir / "linear.csv").string(), "--manifest", (dir / "m.json").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = parse(r.out);
    EXPECT_TRUE(j["knee"].is_null());
    EXPECT_TRUE(j["psd"].is_null());
    EXPECT_EQ(j["ica"]["track"].size(), 2u);
    EXPECT_NE(j["warnings"][0].get<std::string>().find("degenerate_input"), std::string::npos);
}

TEST(CliReport, BadConfigNamesTheFile) {
    const auto dir = scratch_dir();
    write(dir / "cell.csv", fade_csv(2));
    write(dir / "cfg.json", R"({"segmentation_m": 20, "colour": "blue"})");
    const auto r = run_cli({"report", "-i", (dir / "cell.csv").string(), "--config", (dir / "cfg.json").string()});
    EXPECT_EQ(r.code, 2);
    const auto e = parse(r.err);
    EXPECT_EQ(e["error"]["kind"], "config_error");
    EXPECT_NE(e["error"]["message"].get<std::string>().find((dir / "cfg.json").string()), std::string::npos);
    EXPECT_NE(e["error"]["message"].get<std::string>().find("colour"), std::string::npos);
}

TEST(CliReport, ConfigFileIsAppliedAndEchoed) {
    const auto dir = scratch_dir();
    write(dir / "cell.csv", fade_csv(2));
    write(dir / "cfg.json", R"({"segmentation_m": 20, "welch_window": "rect"})");
    const auto r = run_cli({"report", "-i", (dir / "cell.csv").string(), "-c", (dir / "cfg.json").string(),
                            "--overlap", "0.25"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = parse(r.out);
    EXPECT_EQ(j["knee"]["resolved"]["subsequence_length"], 20);
    const auto echoed = config_from_json(j["config"]);
    EXPECT_EQ(echoed.welch_window, WindowKind::rectangular);
    EXPECT_DOUBLE_EQ(echoed.welch_overlap, 0.25);
    EXPECT_EQ(echoed.segmentation_m, 20);
}

TEST(CliReport, ByteIdenticalAcrossRuns) {
    const auto dir = scratch_dir();
    write(dir / "cell.csv", fade_csv(9));
    const std::vector<std::string> args{"report", "-i", (dir / "cell.csv").string(), "--series"};
    const auto a = run_cli(args);
    const auto b = run_cli(args);
    ASSERT_EQ(a.code, 0) << a.err;
    EXPECT_EQ(a.out, b.out);
}
