#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace capfade {

/// Natural cubic spline interpolant (zero second derivative at both ends).
/// Knots must be strictly increasing; at least two are required.
class NaturalCubicSpline {
public:
    NaturalCubicSpline(std::span<const double> x, std::span<const double> y)
        : x_(x.begin(), x.end()), y_(y.begin(), y.end()), m_(x.size(), 0.0) {
        if (x.size() != y.size() || x.size() < 2) {
            throw std::invalid_argument("spline needs >= 2 knots of matching length");
        }
        for (std::size_t i = 1; i < x_.size(); ++i) {
            if (!(x_[i] > x_[i - 1])) {
                throw std::invalid_argument("spline knots must be strictly increasing");
            }
        }
        solve_second_derivatives();
    }

    double operator()(double t) const {
        const std::size_t n = x_.size();
        // Segment i covers [x_i, x_{i+1}]; outside the knot span the end cubic is extended.
        std::size_t i = static_cast<std::size_t>(
            std::upper_bound(x_.begin(), x_.end(), t) - x_.begin());
        i = std::clamp<std::size_t>(i == 0 ? 0 : i - 1, 0, n - 2);
        const double h = x_[i + 1] - x_[i];
        const double a = (x_[i + 1] - t) / h;
        const double b = (t - x_[i]) / h;
        return a * y_[i] + b * y_[i + 1] +
               ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * (h * h) / 6.0;
    }

private:
    // Thomas algorithm on the interior equations; m_0 = m_{n-1} = 0.
    void solve_second_derivatives() {
        const std::size_t n = x_.size();
        if (n < 3) return;
        std::vector<double> diag(n, 0.0), upper(n, 0.0), rhs(n, 0.0);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double h0 = x_[i] - x_[i - 1];
            const double h1 = x_[i + 1] - x_[i];
            diag[i] = 2.0 * (h0 + h1);
            upper[i] = h1;
            rhs[i] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
            if (i > 1) {
                const double w = h0 / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
        }
        for (std::size_t i = n - 2; i >= 1; --i) {
            m_[i] = (rhs[i] - (i + 2 < n ? upper[i] * m_[i + 1] : 0.0)) / diag[i];
            if (i == 1) break;
        }
    }

    std::vector<double> x_;
    std::vector<double> y_;
    std::vector<double> m_;
};

} // namespace capfade
