#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <istream>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "capfade/errors.hpp"
#include "capfade/spline.hpp"

namespace capfade {

inline constexpr std::size_t kMinSeriesLength = 8;
inline constexpr std::size_t kMinRptLength = 16;
// Voltage excursions against the sweep direction up to this size are tolerated as noise.
inline constexpr double kRptMonotoneToleranceV = 0.005;

/// Per-cycle capacity of one cell. Immutable once built; the constructor
/// enforces ordering, positivity and minimum length, and derives `is_uniform`.
class CapacitySeries {
public:
    CapacitySeries(std::string cell_id, std::vector<double> cycle,
                   std::vector<double> capacity_ah, double nominal_capacity_ah)
        : cell_id_(std::move(cell_id)),
          cycle_(std::move(cycle)),
          capacity_ah_(std::move(capacity_ah)),
          nominal_capacity_ah_(nominal_capacity_ah) {
        if (cycle_.size() != capacity_ah_.size()) {
            throw DomainError("cycle and capacity columns differ in length");
        }
        if (cycle_.size() < kMinSeriesLength) {
            throw InsufficientDataError("capacity series needs at least " +
                                        std::to_string(kMinSeriesLength) + " rows, got " +
                                        std::to_string(cycle_.size()));
        }
        if (!(nominal_capacity_ah_ > 0.0) || !std::isfinite(nominal_capacity_ah_)) {
            throw DomainError("nominal capacity must be positive");
        }
        for (std::size_t i = 0; i < cycle_.size(); ++i) {
            if (!std::isfinite(cycle_[i]) || cycle_[i] < 0.0) {
                throw DomainError("cycle numbers must be finite and non-negative");
            }
            if (i > 0 && !(cycle_[i] > cycle_[i - 1])) {
                throw DomainError("cycle numbers must be strictly increasing");
            }
            if (!(capacity_ah_[i] > 0.0) || !std::isfinite(capacity_ah_[i])) {
                throw DomainError("capacity must be positive at cycle " +
                                  std::to_string(cycle_[i]));
            }
        }
        double gmin = cycle_[1] - cycle_[0];
        double gmax = gmin;
        for (std::size_t i = 2; i < cycle_.size(); ++i) {
            const double g = cycle_[i] - cycle_[i - 1];
            gmin = std::min(gmin, g);
            gmax = std::max(gmax, g);
        }
        mean_gap_ = (cycle_.back() - cycle_.front()) / static_cast<double>(cycle_.size() - 1);
        is_uniform_ = (gmax - gmin) < 1e-9 * mean_gap_;
    }

    const std::string& cell_id() const noexcept { return cell_id_; }
    const std::vector<double>& cycle() const noexcept { return cycle_; }
    const std::vector<double>& capacity_ah() const noexcept { return capacity_ah_; }
    double nominal_capacity_ah() const noexcept { return nominal_capacity_ah_; }
    bool is_uniform() const noexcept { return is_uniform_; }
    std::size_t size() const noexcept { return cycle_.size(); }
    double mean_gap() const noexcept { return mean_gap_; }

    friend bool operator==(const CapacitySeries&, const CapacitySeries&) = default;

private:
    std::string cell_id_;
    std::vector<double> cycle_;
    std::vector<double> capacity_ah_;
    double nominal_capacity_ah_;
    double mean_gap_ = 0.0;
    bool is_uniform_ = false;
};

enum class SweepDirection { charge, discharge };

inline std::string_view to_string(SweepDirection d) {
    return d == SweepDirection::charge ? "charge" : "discharge";
}

inline SweepDirection parse_direction(std::string_view s) {
    if (s == "charge") return SweepDirection::charge;
    if (s == "discharge") return SweepDirection::discharge;
    throw DomainError("direction must be 'charge' or 'discharge', got '" + std::string(s) + "'");
}

/// Pseudo-OCV curve from one reference performance test.
struct RptRecord {
    int rpt_index = 0;
    double cycle_at_rpt = 0.0;
    std::vector<double> voltage_v;
    std::vector<double> capacity_ah;
    SweepDirection direction = SweepDirection::charge;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

inline double parse_field(std::string_view field, std::size_t line, std::string_view name) {
    field = trim(field);
    if (!field.empty() && field.front() == '+') field.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || ec != std::errc() || ptr != field.data() + field.size() ||
        !std::isfinite(v)) {
        throw ParseError(line, "non-numeric " + std::string(name) + " '" + std::string(field) + "'");
    }
    return v;
}

struct Row {
    double a;
    double b;
};

// Reads a two-column CSV with the exact header `col_a,col_b`. Blank lines are skipped.
inline std::vector<Row> read_two_column_csv(std::istream& in, std::string_view col_a,
                                            std::string_view col_b) {
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) {
        throw ParseError(1, "empty input, expected header");
    }
    ++lineno;
    std::string_view header = trim(line);
    if (header.size() >= 3 && static_cast<unsigned char>(header[0]) == 0xEF &&
        static_cast<unsigned char>(header[1]) == 0xBB &&
        static_cast<unsigned char>(header[2]) == 0xBF) {
        header.remove_prefix(3);
    }
    const std::string expected = std::string(col_a) + "," + std::string(col_b);
    if (header != expected) {
        throw ParseError(1, "expected header '" + expected + "'");
    }
    std::vector<Row> rows;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string_view s = trim(line);
        if (s.empty()) continue;
        const auto comma = s.find(',');
        if (comma == std::string_view::npos) {
            throw ParseError(lineno, "missing column '" + std::string(col_b) + "'");
        }
        const std::string_view rest = s.substr(comma + 1);
        if (rest.find(',') != std::string_view::npos) {
            throw ParseError(lineno, "too many columns");
        }
        rows.push_back({parse_field(s.substr(0, comma), lineno, col_a),
                        parse_field(rest, lineno, col_b)});
    }
    return rows;
}

inline std::string format_double(double v) {
    char buf[32];
    const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf, static_cast<std::size_t>(n));
}

} // namespace detail

/// Parses `cycle,capacity_ah` CSV. Rows are sorted by cycle; a repeated cycle
/// keeps the row that appears last in the file.
inline CapacitySeries parse_capacity_csv(std::istream& source, std::string cell_id,
                                         double nominal_capacity_ah) {
    auto rows = detail::read_two_column_csv(source, "cycle", "capacity_ah");
    std::stable_sort(rows.begin(), rows.end(),
                     [](const detail::Row& l, const detail::Row& r) { return l.a < r.a; });
    std::vector<double> cycle;
    std::vector<double> cap;
    cycle.reserve(rows.size());
    cap.reserve(rows.size());
    for (const auto& r : rows) {
        if (!cycle.empty() && cycle.back() == r.a) {
            cap.back() = r.b;
            continue;
        }
        cycle.push_back(r.a);
        cap.push_back(r.b);
    }
    return CapacitySeries(std::move(cell_id), std::move(cycle), std::move(cap),
                          nominal_capacity_ah);
}

inline CapacitySeries parse_capacity_csv(std::string_view text, std::string cell_id,
                                         double nominal_capacity_ah) {
    std::istringstream in{std::string(text)};
    return parse_capacity_csv(in, std::move(cell_id), nominal_capacity_ah);
}

inline std::string write_capacity_csv(const CapacitySeries& s) {
    std::string out = "cycle,capacity_ah\n";
    for (std::size_t i = 0; i < s.size(); ++i) {
        out += detail::format_double(s.cycle()[i]);
        out += ',';
        out += detail::format_double(s.capacity_ah()[i]);
        out += '\n';
    }
    return out;
}

/// Interpolates the series onto cycle[0], cycle[0]+step, ... <= cycle[last]
/// with a natural cubic spline.
inline CapacitySeries resample_uniform(const CapacitySeries& series, double grid_step) {
    const double first = series.cycle().front();
    const double span = series.cycle().back() - first;
    if (!(grid_step > 0.0) || !std::isfinite(grid_step)) {
        throw DomainError("grid step must be positive");
    }
    if (grid_step > span) {
        throw DomainError("grid step exceeds the series span");
    }
    const NaturalCubicSpline spline(series.cycle(), series.capacity_ah());
    const auto count = static_cast<std::size_t>(std::floor(span / grid_step * (1.0 + 1e-12))) + 1;
    std::vector<double> cycle(count);
    std::vector<double> cap(count);
    for (std::size_t i = 0; i < count; ++i) {
        cycle[i] = first + static_cast<double>(i) * grid_step;
        cap[i] = spline(cycle[i]);
    }
    return CapacitySeries(series.cell_id(), std::move(cycle), std::move(cap),
                          series.nominal_capacity_ah());
}

/// Parses `voltage_v,capacity_ah` CSV. Runs of identical consecutive voltages
/// collapse into one row with the mean capacity.
inline RptRecord parse_rpt_csv(std::istream& source, int rpt_index, double cycle_at_rpt,
                               SweepDirection direction) {
    const auto rows = detail::read_two_column_csv(source, "voltage_v", "capacity_ah");
    RptRecord rec;
    rec.rpt_index = rpt_index;
    rec.cycle_at_rpt = cycle_at_rpt;
    rec.direction = direction;
    for (std::size_t i = 0; i < rows.size();) {
        std::size_t j = i;
        double sum = 0.0;
        while (j < rows.size() && rows[j].a == rows[i].a) {
            sum += rows[j].b;
            ++j;
        }
        rec.voltage_v.push_back(rows[i].a);
        rec.capacity_ah.push_back(sum / static_cast<double>(j - i));
        i = j;
    }
    if (rec.voltage_v.size() < kMinRptLength) {
        throw InsufficientDataError("RPT curve needs at least " + std::to_string(kMinRptLength) +
                                    " distinct voltage rows, got " +
                                    std::to_string(rec.voltage_v.size()));
    }
    const double sign = direction == SweepDirection::charge ? 1.0 : -1.0;
    double extreme = sign * rec.voltage_v.front();
    for (std::size_t i = 1; i < rec.voltage_v.size(); ++i) {
        const double v = sign * rec.voltage_v[i];
        if (v < extreme - kRptMonotoneToleranceV) {
            throw DomainError("voltage moves against the " + std::string(to_string(direction)) +
                              " direction by more than 5 mV at row " + std::to_string(i + 1));
        }
        extreme = std::max(extreme, v);
    }
    return rec;
}

inline RptRecord parse_rpt_csv(std::string_view text, int rpt_index, double cycle_at_rpt,
                               SweepDirection direction) {
    std::istringstream in{std::string(text)};
    return parse_rpt_csv(in, rpt_index, cycle_at_rpt, direction);
}

} // namespace capfade
