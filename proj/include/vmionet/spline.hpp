#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "vmionet/error.hpp"

namespace vmionet {

/// Interpolating cubic spline with period 2*pi on uniform knots
/// theta_i = 2*pi*i/m.
class PeriodicSpline {
public:
    PeriodicSpline() = default;

    explicit PeriodicSpline(std::vector<double> values) : y_(std::move(values)) {
        const std::size_t m = y_.size();
        if (m < 3) throw InvalidArgument("periodic spline needs at least 3 knots");
        h_ = 2.0 * std::numbers::pi / static_cast<double>(m);
        // Second derivatives solve the cyclic system
        //   M[i-1] + 4 M[i] + M[i+1] = 6/h^2 (y[i+1] - 2 y[i] + y[i-1]).
        std::vector<double> rhs(m);
        for (std::size_t i = 0; i < m; ++i) {
            const double prev = y_[(i + m - 1) % m];
            const double next = y_[(i + 1) % m];
            rhs[i] = 6.0 / (h_ * h_) * (next - 2.0 * y_[i] + prev);
        }
        m2_ = solve_cyclic(rhs);
    }

    [[nodiscard]] std::size_t size() const { return y_.size(); }
    [[nodiscard]] std::span<const double> knots() const { return y_; }

    [[nodiscard]] double operator()(double theta) const {
        const auto [i, t] = locate(theta);
        const std::size_t j = (i + 1) % y_.size();
        const double a = 1.0 - t;
        const double b = t;
        return a * y_[i] + b * y_[j] +
               ((a * a * a - a) * m2_[i] + (b * b * b - b) * m2_[j]) * (h_ * h_) / 6.0;
    }

    [[nodiscard]] double derivative(double theta) const {
        const auto [i, t] = locate(theta);
        const std::size_t j = (i + 1) % y_.size();
        const double a = 1.0 - t;
        const double b = t;
        return (y_[j] - y_[i]) / h_ +
               (-(3.0 * a * a - 1.0) * m2_[i] + (3.0 * b * b - 1.0) * m2_[j]) * h_ / 6.0;
    }

private:
    struct Cell {
        std::size_t index;
        double t;
    };

    [[nodiscard]] Cell locate(double theta) const {
        constexpr double two_pi = 2.0 * std::numbers::pi;
        double u = std::fmod(theta, two_pi);
        if (u < 0.0) u += two_pi;
        const double s = u / h_;
        auto i = static_cast<std::size_t>(s);
        if (i >= y_.size()) i = y_.size() - 1;
        return {i, s - static_cast<double>(i)};
    }

    // Sherman-Morrison on the cyclic tridiagonal matrix (1, 4, 1).
    static std::vector<double> solve_cyclic(const std::vector<double>& rhs) {
        const std::size_t n = rhs.size();
        constexpr double diag = 4.0;
        constexpr double off = 1.0;
        const double gamma = -diag;
        std::vector<double> main(n, diag);
        main[0] = diag - gamma;
        main[n - 1] = diag - off * off / gamma;

        auto thomas = [&](std::vector<double> d) {
            std::vector<double> c(n, 0.0);
            std::vector<double> b = main;
            c[0] = off / b[0];
            d[0] /= b[0];
            for (std::size_t i = 1; i < n; ++i) {
                const double denom = b[i] - off * c[i - 1];
                c[i] = off / denom;
                d[i] = (d[i] - off * d[i - 1]) / denom;
            }
            for (std::size_t i = n - 1; i-- > 0;) d[i] -= c[i] * d[i + 1];
            return d;
        };

        std::vector<double> x = thomas(rhs);
        std::vector<double> u(n, 0.0);
        u[0] = gamma;
        u[n - 1] = off;
        std::vector<double> z = thomas(u);
        const double v_last = off / gamma;
        const double fact = (x[0] + v_last * x[n - 1]) / (1.0 + z[0] + v_last * z[n - 1]);
        for (std::size_t i = 0; i < n; ++i) x[i] -= fact * z[i];
        return x;
    }

    std::vector<double> y_;
    std::vector<double> m2_;
    double h_ = 0.0;
};

}  // namespace vmionet
