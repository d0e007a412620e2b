#pragma once

// Random region families: convex polygons in the unit square and smooth
// polar regions whose radial function is a periodic GP draw.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "vmionet/error.hpp"
#include "vmionet/geometry.hpp"
#include "vmionet/rng.hpp"
#include "vmionet/sampling.hpp"

namespace vmionet {

inline constexpr int kRejectionBudget = 10000;

struct PolygonConfig {
    double min_interior_angle_deg = 20.0;
    double min_area = 0.05;
    double lipschitz_bound = kDefaultLipschitzBound;
};

/// Convex k-gon (k in {4,5,6}) with vertices in [0,1]^2, by rejection.
inline Region random_convex_polygon(int k, std::uint64_t seed, const PolygonConfig& cfg = {}) {
    if (k < 4 || k > 6) throw InvalidArgument("polygon vertex count must be 4, 5 or 6");
    const double min_angle = cfg.min_interior_angle_deg * std::numbers::pi / 180.0;
    const auto n = static_cast<std::size_t>(k);
    for (int attempt = 0; attempt < kRejectionBudget; ++attempt) {
        RandomStream rng(seed, static_cast<std::uint64_t>(attempt), "convex-polygon");
        std::vector<Point2> pts(n);
        Point2 mean{};
        for (auto& p : pts) {
            p.x = rng.uniform();
            p.y = rng.uniform();
            mean = mean + p;
        }
        mean = (1.0 / static_cast<double>(n)) * mean;
        std::sort(pts.begin(), pts.end(), [&](Point2 a, Point2 b) {
            return angle_of(a - mean) < angle_of(b - mean);
        });

        bool ok = true;
        double a2 = 0.0;
        for (std::size_t i = 0; i < n && ok; ++i) {
            const Point2 prev = pts[(i + n - 1) % n];
            const Point2 cur = pts[i];
            const Point2 next = pts[(i + 1) % n];
            const Point2 u = prev - cur;
            const Point2 v = next - cur;
            // Strict left turn at every vertex.
            if (!(cross(cur - prev, next - cur) > 0.0)) ok = false;
            const double interior = std::atan2(std::abs(cross(u, v)), dot(u, v));
            if (interior < min_angle) ok = false;
            a2 += cross(cur, next);
        }
        if (!ok || 0.5 * a2 < cfg.min_area) continue;

        try {
            Region r = Region::polygon(std::move(pts), cfg.lipschitz_bound);
            if (lipschitz_estimate(r) > cfg.lipschitz_bound) continue;
            return r;
        } catch (const InvalidArgument&) {
            continue;
        }
    }
    throw NumericalFailure("random_convex_polygon: rejection budget exhausted");
}

struct SmoothRegionConfig {
    GPConfig boundary = default_boundary_gp();
    double base_radius = 0.3;
    /// Multiplier on the GP draw: b = base_radius + amplitude * g.
    double amplitude = 0.5;
    std::size_t samples = 128;
    double lipschitz_bound = kDefaultLipschitzBound;
};

/// Smooth polar region b(theta) = r0 + a*g(theta) translated so that its
/// bounding box is centred in [0,1]^2.
inline Region random_smooth_region(std::uint64_t seed, const SmoothRegionConfig& cfg = {}) {
    if (cfg.samples < 8) throw InvalidArgument("smooth region needs at least 8 samples");
    const double r0 = cfg.base_radius;
    const double floor_radius = 0.1 * r0;
    std::vector<double> angles(cfg.samples);
    for (std::size_t i = 0; i < cfg.samples; ++i)
        angles[i] = kTwoPi * static_cast<double>(i) / static_cast<double>(cfg.samples);

    for (int attempt = 0; attempt < kRejectionBudget; ++attempt) {
        const auto g = gp_sample(
            angles, cfg.boundary.with_seed(derive_seed(seed, static_cast<std::uint64_t>(attempt),
                                                       "smooth-boundary")));
        const double gmin = *std::min_element(g.begin(), g.end());
        double a = cfg.amplitude;
        if (gmin < 0.0 && r0 + a * gmin <= floor_radius) a = 0.95 * (r0 - floor_radius) / -gmin;

        auto build = [&](double amp) {
            std::vector<double> radii(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) radii[i] = r0 + amp * g[i];
            return Region::sampled({0.0, 0.0}, std::move(radii), cfg.lipschitz_bound);
        };

        try {
            Region region = build(a);
            for (int shrink = 0; shrink < 20; ++shrink) {
                const double lip = lipschitz_estimate(region);
                if (lip <= cfg.lipschitz_bound) break;
                a *= 0.95 * cfg.lipschitz_bound / lip;
                region = build(a);
            }
            if (lipschitz_estimate(region) > cfg.lipschitz_bound) continue;
            // Radial function about the pole must stay above the floor.
            bool above = true;
            for (std::size_t i = 0; i < 4096 && above; ++i) {
                const double t = kTwoPi * static_cast<double>(i) / 4096.0;
                if (!(region.boundary_radius(t, region.pole()) > floor_radius)) above = false;
            }
            if (!above) continue;
            const auto [lo, hi] = region.bounding_box();
            if (hi.x - lo.x >= 1.0 || hi.y - lo.y >= 1.0) continue;
            const Point2 shift = Point2{0.5, 0.5} - 0.5 * (lo + hi);
            return region.translated(shift);
        } catch (const InvalidArgument&) {
            continue;
        }
    }
    throw NumericalFailure("random_smooth_region: rejection budget exhausted");
}

}  // namespace vmionet
