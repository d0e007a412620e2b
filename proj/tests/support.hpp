#pragma once

// Shared oracles for the unit and acceptance suites.

#include <algorithm>
#include <cmath>
#include <vector>

#include "vmionet/mionet.hpp"
#include "vmionet/rng.hpp"

namespace vmionet::testing {

inline Matrix random_matrix(Eigen::Index r, Eigen::Index c, RandomStream& rng, double scale = 1.0) {
    Matrix m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i) m(i, j) = scale * rng.uniform(-1.0, 1.0);
    return m;
}

inline Matrix random_disk_points(Eigen::Index m, RandomStream& rng) {
    Matrix y(2, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        const double r = std::sqrt(rng.uniform());
        const double t = 2.0 * 3.141592653589793 * rng.uniform();
        y(0, j) = r * std::cos(t);
        y(1, j) = r * std::sin(t);
    }
    return y;
}

/// A small random MIONet: 1-3 branches (one possibly linear), widths <= 8.
inline MIONetSpec random_small_spec(RandomStream& rng) {
    const std::size_t p = 1 + rng.below(8);
    auto sizes = [&](std::size_t in) {
        std::vector<std::size_t> s{in};
        const auto hidden = rng.below(3);
        for (std::uint64_t l = 0; l < hidden; ++l) s.push_back(1 + rng.below(8));
        s.push_back(p);
        return s;
    };
    MIONetSpec spec;
    const auto branches = 1 + rng.below(3);
    for (std::uint64_t b = 0; b < branches; ++b) {
        const std::size_t in = 1 + rng.below(8);
        if (b + 1 == branches && rng.below(2) == 0) spec.branches.push_back(MLPSpec::linear(in, p));
        else spec.branches.push_back(MLPSpec::relu(sizes(in)));
    }
    spec.trunk = MLPSpec::relu(sizes(2));
    spec.output_bias = rng.below(2) == 1;
    return spec;
}

/// Largest per-parameter relative error between the analytic gradient of
/// sum(upstream .* out) and central differences with step h. The denominator
/// is max(|fd|, |g|, floor) so parameters with O(1e-10) gradients are judged
/// absolutely instead of amplifying roundoff.
inline double gradient_check(MIONetModel& model, const std::vector<Matrix>& inputs, const Matrix& y,
                             const Matrix& upstream, double h = 1e-6, double floor = 1e-3) {
    ForwardCache cache;
    (void)model.forward(inputs, y, &cache);
    const Vector g = model.backward(cache, upstream);
    auto objective = [&] { return (model.forward(inputs, y).array() * upstream.array()).sum(); };
    double worst = 0.0;
    Vector& p = model.parameters();
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        const double keep = p(i);
        p(i) = keep + h;
        const double fp = objective();
        p(i) = keep - h;
        const double fm = objective();
        p(i) = keep;
        const double fd = (fp - fm) / (2.0 * h);
        const double denom = std::max({std::abs(fd), std::abs(g(i)), floor});
        worst = std::max(worst, std::abs(fd - g(i)) / denom);
    }
    return worst;
}

}  // namespace vmionet::testing
