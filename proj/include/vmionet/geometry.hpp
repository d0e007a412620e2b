#pragma once

// Polar (star-shaped) regions in the plane and the maps that relate them to
// the closed unit disk.
//
// A region is described by its boundary radial function b(theta): the
// distance from the area centroid to the boundary along direction theta.
// Two storage kinds exist: exact polygons, and smooth boundaries sampled at
// uniform angles about a pole and interpolated by a periodic cubic spline.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "vmionet/error.hpp"
#include "vmionet/spline.hpp"

namespace vmionet {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend constexpr Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
    friend constexpr Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
    friend constexpr Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }
    friend constexpr Point2 operator*(Point2 a, double s) { return {s * a.x, s * a.y}; }
    friend constexpr bool operator==(Point2 a, Point2 b) = default;
};

constexpr double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point2 a) { return std::hypot(a.x, a.y); }
inline double distance(Point2 a, Point2 b) { return norm(a - b); }
inline Point2 unit_vector(double theta) { return {std::cos(theta), std::sin(theta)}; }
inline double angle_of(Point2 a) { return std::atan2(a.y, a.x); }

/// Wrap an angle into [0, 2*pi).
inline double wrap_angle(double theta) {
    double u = std::fmod(theta, kTwoPi);
    if (u < 0.0) u += kTwoPi;
    if (u >= kTwoPi) u = 0.0;
    return u;
}

inline bool is_finite(Point2 p) { return std::isfinite(p.x) && std::isfinite(p.y); }

enum class RegionKind { Polygon, SampledBoundary };

inline constexpr double kDefaultLipschitzBound = 2.0;
inline constexpr double kDegenerateArea = 1e-12;

/// Immutable polar region. Construction validates star-shapedness about the
/// area centroid and caches everything needed for fast radial queries.
class Region {
public:
    /// Counter-clockwise simple polygon, star-shaped about its centroid.
    static Region polygon(std::vector<Point2> vertices,
                          double lipschitz_bound = kDefaultLipschitzBound) {
        Region r;
        r.kind_ = RegionKind::Polygon;
        r.lipschitz_bound_ = lipschitz_bound;
        r.vertices_ = std::move(vertices);
        r.init_polygon();
        return r;
    }

    /// Boundary pole + b(2*pi*i/m) for i = 0..m-1, spline interpolated.
    /// The radii are measured from `pole`; the area centroid is computed and
    /// generally differs slightly from the pole.
    static Region sampled(Point2 pole, std::vector<double> radii,
                          double lipschitz_bound = kDefaultLipschitzBound) {
        Region r;
        r.kind_ = RegionKind::SampledBoundary;
        r.lipschitz_bound_ = lipschitz_bound;
        r.pole_ = pole;
        r.radii_ = std::move(radii);
        r.init_sampled();
        return r;
    }

    static Region disk(Point2 center, double radius, std::size_t samples = 64) {
        return sampled(center, std::vector<double>(samples, radius));
    }

    [[nodiscard]] RegionKind kind() const { return kind_; }
    [[nodiscard]] std::span<const Point2> vertices() const { return vertices_; }
    [[nodiscard]] std::span<const double> radii() const { return radii_; }
    [[nodiscard]] Point2 pole() const { return pole_; }
    [[nodiscard]] Point2 centroid() const { return centroid_; }
    [[nodiscard]] double area() const { return area_; }
    [[nodiscard]] double lipschitz_bound() const { return lipschitz_bound_; }

    /// b(theta) about the centroid.
    [[nodiscard]] double boundary_radius(double theta) const {
        const double t = wrap_angle(theta);
        if (kind_ == RegionKind::Polygon) return polygon_radius_about_centroid(t);
        return sampled_radius(centroid_table_, centroid_, t);
    }

    /// Distance from `origin` to the boundary along direction theta.
    [[nodiscard]] double boundary_radius(double theta, Point2 origin) const {
        if (origin == centroid_) return boundary_radius(theta);
        if (!contains_strictly(origin)) throw InvalidArgument("origin not interior");
        const double t = wrap_angle(theta);
        if (kind_ == RegionKind::Polygon) return polygon_radius_generic(origin, t);
        if (origin == pole_) return spline_(t);
        return sampled_radius(build_table(origin), origin, t);
    }

    [[nodiscard]] Point2 boundary_point(double theta) const {
        return centroid_ + boundary_radius(theta) * unit_vector(theta);
    }

    /// Strict interior test.
    [[nodiscard]] bool contains_strictly(Point2 p) const {
        if (kind_ == RegionKind::Polygon) {
            // Star-shaped about the centroid: compare against the ray distance.
            const Point2 d = p - centroid_;
            const double r = norm(d);
            if (r == 0.0) return true;
            return r < polygon_radius_about_centroid(wrap_angle(angle_of(d)));
        }
        const Point2 d = p - pole_;
        const double r = norm(d);
        if (r == 0.0) return true;
        return r < spline_(angle_of(d));
    }

    [[nodiscard]] Region translated(Point2 t) const {
        if (kind_ == RegionKind::Polygon) {
            std::vector<Point2> v(vertices_.begin(), vertices_.end());
            for (auto& p : v) p = p + t;
            return polygon(std::move(v), lipschitz_bound_);
        }
        return sampled(pole_ + t, radii_, lipschitz_bound_);
    }

    /// Axis-aligned bounding box as {min, max}, from a dense boundary sweep
    /// (exact for polygons).
    [[nodiscard]] std::pair<Point2, Point2> bounding_box() const {
        Point2 lo{1e300, 1e300};
        Point2 hi{-1e300, -1e300};
        auto take = [&](Point2 p) {
            lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
            hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
        };
        if (kind_ == RegionKind::Polygon) {
            for (auto p : vertices_) take(p);
        } else {
            constexpr std::size_t n = 2048;
            for (std::size_t i = 0; i < n; ++i) {
                const double t = kTwoPi * static_cast<double>(i) / n;
                take(pole_ + spline_(t) * unit_vector(t));
            }
        }
        return {lo, hi};
    }

    [[nodiscard]] double diameter_estimate() const {
        const auto [lo, hi] = bounding_box();
        return std::max(hi.x - lo.x, hi.y - lo.y);
    }

    /// Boundary angles about the centroid at which b is not smooth
    /// (polygon vertices); empty for sampled boundaries.
    [[nodiscard]] std::vector<double> corner_angles() const {
        std::vector<double> out;
        for (auto v : vertices_) out.push_back(wrap_angle(angle_of(v - centroid_)));
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    // Dense table of the boundary curve seen from an origin: curve parameter
    // phi_k and the unwrapped polar angle psi_k of curve(phi_k) - origin.
    struct AngleTable {
        std::vector<double> phi;
        std::vector<double> psi;
    };

    static constexpr std::size_t kTableSize = 1024;
    static constexpr std::size_t kQuadratureSize = 4096;

    Region() = default;

    void init_polygon() {
        const std::size_t n = vertices_.size();
        if (n < 3) throw InvalidArgument("invalid polygon: fewer than 3 vertices");
        for (auto p : vertices_)
            if (!is_finite(p)) throw InvalidArgument("invalid polygon: non-finite vertex");
        double a2 = 0.0;
        Point2 c{};
        for (std::size_t i = 0; i < n; ++i) {
            const Point2 p = vertices_[i];
            const Point2 q = vertices_[(i + 1) % n];
            const double w = cross(p, q);
            a2 += w;
            c = c + w * (p + q);
        }
        if (std::abs(a2) * 0.5 < kDegenerateArea) throw InvalidArgument("degenerate region");
        if (a2 < 0.0) throw InvalidArgument("invalid polygon: vertices are clockwise");
        area_ = 0.5 * a2;
        centroid_ = (1.0 / (3.0 * a2)) * c;
        pole_ = centroid_;

        // Every edge must subtend a positive angle at the centroid and the
        // angles must add up to one full turn. This rules out
        // self-intersection and anything not star-shaped about the centroid.
        double sweep = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const Point2 a = vertices_[i] - centroid_;
            const Point2 b = vertices_[(i + 1) % n] - centroid_;
            const double cr = cross(a, b);
            if (!(cr > 1e-14 * norm(a) * norm(b)))
                throw InvalidArgument("invalid polygon: not star-shaped about its centroid");
            sweep += std::atan2(cr, dot(a, b));
        }
        if (std::abs(sweep - kTwoPi) > 1e-9)
            throw InvalidArgument("invalid polygon: self-intersecting boundary");

        vertex_angles_.resize(n + 1);
        vertex_angles_[0] = angle_of(vertices_[0] - centroid_);
        for (std::size_t i = 1; i <= n; ++i) {
            const Point2 a = vertices_[i - 1] - centroid_;
            const Point2 b = vertices_[i % n] - centroid_;
            vertex_angles_[i] = vertex_angles_[i - 1] + std::atan2(cross(a, b), dot(a, b));
        }
    }

    void init_sampled() {
        if (radii_.size() < 3) throw InvalidArgument("sampled boundary needs at least 3 radii");
        if (!is_finite(pole_)) throw InvalidArgument("non-finite pole");
        for (double r : radii_)
            if (!(r > 0.0) || !std::isfinite(r))
                throw InvalidArgument("boundary radii must be positive and finite");
        spline_ = PeriodicSpline(radii_);

        // Area and first moments in polar coordinates about the pole.
        double s = 0.0;
        Point2 m{};
        const double dt = kTwoPi / kQuadratureSize;
        for (std::size_t i = 0; i < kQuadratureSize; ++i) {
            const double t = dt * static_cast<double>(i);
            const double b = spline_(t);
            if (!(b > 0.0)) throw InvalidArgument("boundary radial function is not positive");
            s += 0.5 * b * b * dt;
            m = m + (b * b * b / 3.0 * dt) * unit_vector(t);
        }
        if (s < kDegenerateArea) throw InvalidArgument("degenerate region");
        area_ = s;
        centroid_ = pole_ + (1.0 / s) * m;
        if (!contains_strictly(centroid_))
            throw InvalidArgument("centroid lies outside the sampled boundary");
        centroid_table_ = build_table(centroid_);
    }

    [[nodiscard]] Point2 curve(double phi) const { return pole_ + spline_(phi) * unit_vector(phi); }

    [[nodiscard]] AngleTable build_table(Point2 origin) const {
        AngleTable t;
        t.phi.resize(kTableSize + 1);
        t.psi.resize(kTableSize + 1);
        Point2 prev = curve(0.0) - origin;
        t.phi[0] = 0.0;
        t.psi[0] = angle_of(prev);
        for (std::size_t k = 1; k <= kTableSize; ++k) {
            const double phi = kTwoPi * static_cast<double>(k) / kTableSize;
            const Point2 d = curve(k == kTableSize ? 0.0 : phi) - origin;
            const double step = std::atan2(cross(prev, d), dot(prev, d));
            if (!(step > 0.0))
                throw InvalidArgument("boundary is not star-shaped about the query origin");
            t.phi[k] = phi;
            t.psi[k] = t.psi[k - 1] + step;
            prev = d;
        }
        if (std::abs(t.psi[kTableSize] - t.psi[0] - kTwoPi) > 1e-9)
            throw InvalidArgument("boundary is not star-shaped about the query origin");
        return t;
    }

    // Solve angle(curve(phi) - origin) == theta inside the bracketing cell.
    [[nodiscard]] double sampled_radius(const AngleTable& table, Point2 origin,
                                        double theta) const {
        const double base = table.psi.front();
        double target = base + std::fmod(theta - base, kTwoPi);
        if (target < base) target += kTwoPi;
        auto it = std::upper_bound(table.psi.begin(), table.psi.end(), target);
        std::size_t k = static_cast<std::size_t>(it - table.psi.begin());
        k = std::clamp<std::size_t>(k, 1, kTableSize) - 1;

        const Point2 dir = unit_vector(target);
        auto residual = [&](double phi) {
            const Point2 d = curve(phi) - origin;
            return std::atan2(cross(dir, d), dot(dir, d));
        };
        double lo = table.phi[k];
        double hi = table.phi[k + 1];
        double flo = residual(lo);
        double fhi = residual(hi);
        if (flo >= 0.0) return norm(curve(lo) - origin);
        if (fhi <= 0.0) return norm(curve(hi) - origin);
        // Illinois-modified regula falsi.
        int side = 0;
        double mid = lo;
        for (int iter = 0; iter < 100; ++iter) {
            mid = (lo * fhi - hi * flo) / (fhi - flo);
            const double fm = residual(mid);
            if (fm == 0.0 || hi - lo < 1e-15) break;
            if (fm < 0.0) {
                lo = mid;
                flo = fm;
                if (side == -1) fhi *= 0.5;
                side = -1;
            } else {
                hi = mid;
                fhi = fm;
                if (side == 1) flo *= 0.5;
                side = 1;
            }
        }
        return norm(curve(mid) - origin);
    }

    [[nodiscard]] double polygon_radius_about_centroid(double theta) const {
        const double base = vertex_angles_.front();
        double target = base + std::fmod(theta - base, kTwoPi);
        if (target < base) target += kTwoPi;
        auto it = std::upper_bound(vertex_angles_.begin(), vertex_angles_.end(), target);
        std::size_t k = static_cast<std::size_t>(it - vertex_angles_.begin());
        const std::size_t n = vertices_.size();
        k = std::clamp<std::size_t>(k, 1, n) - 1;
        return ray_segment(centroid_, unit_vector(theta), vertices_[k], vertices_[(k + 1) % n]);
    }

    [[nodiscard]] double polygon_radius_generic(Point2 origin, double theta) const {
        const Point2 dir = unit_vector(theta);
        const std::size_t n = vertices_.size();
        double best = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            const Point2 a = vertices_[i];
            const Point2 b = vertices_[(i + 1) % n];
            const Point2 e = b - a;
            const double den = cross(dir, e);
            if (den == 0.0) continue;
            const Point2 w = a - origin;
            const double t = cross(w, e) / den;
            const double s = cross(w, dir) / den;
            if (t > 0.0 && s >= -1e-12 && s <= 1.0 + 1e-12) {
                if (best < 0.0 || t < best) best = t;
            }
        }
        if (best < 0.0) throw InvalidArgument("origin not interior");
        return best;
    }

    // Distance along dir from origin to the line through a and b.
    static double ray_segment(Point2 origin, Point2 dir, Point2 a, Point2 b) {
        const Point2 e = b - a;
        return cross(a - origin, e) / cross(dir, e);
    }

    RegionKind kind_ = RegionKind::Polygon;
    std::vector<Point2> vertices_;
    std::vector<double> radii_;
    PeriodicSpline spline_;
    Point2 pole_{};
    Point2 centroid_{};
    double area_ = 0.0;
    double lipschitz_bound_ = kDefaultLipschitzBound;
    std::vector<double> vertex_angles_;
    AngleTable centroid_table_;
};

inline Point2 centroid(const Region& region) { return region.centroid(); }

inline double boundary_radius(const Region& region, double theta, Point2 origin) {
    return region.boundary_radius(theta, origin);
}

inline constexpr double kAlphaTolerance = 1e-9;

/// Radial normalization of the closed region onto the closed unit disk.
inline Point2 alpha(const Region& region, Point2 p, double tol = kAlphaTolerance) {
    const Point2 d = p - region.centroid();
    const double r = norm(d);
    if (r == 0.0) return {0.0, 0.0};
    const double theta = angle_of(d);
    const double b = region.boundary_radius(theta);
    const double rho = r / b;
    if (rho > 1.0 + tol) throw InvalidArgument("point outside region");
    return rho * unit_vector(theta);
}

inline Point2 alpha_inv(const Region& region, Point2 q) {
    const double rho = norm(q);
    if (rho > 1.0 + kAlphaTolerance) throw InvalidArgument("point outside unit disk");
    if (rho == 0.0) return region.centroid();
    const double theta = angle_of(q);
    return region.centroid() + (rho * region.boundary_radius(theta)) * unit_vector(theta);
}

struct RegionMetric {
    std::size_t angle_grid_size = 1024;
};

inline void validate(const RegionMetric& cfg) {
    if (cfg.angle_grid_size < 64) throw InvalidArgument("angle_grid_size must be at least 64");
}

/// Centroid distance plus the grid maximum of |b_a - b_b|.
inline double metric_dU(const Region& a, const Region& b, const RegionMetric& cfg = {}) {
    validate(cfg);
    double sup = 0.0;
    const double n = static_cast<double>(cfg.angle_grid_size);
    for (std::size_t i = 0; i < cfg.angle_grid_size; ++i) {
        const double t = kTwoPi * static_cast<double>(i) / n;
        sup = std::max(sup, std::abs(a.boundary_radius(t) - b.boundary_radius(t)));
    }
    return distance(a.centroid(), b.centroid()) + sup;
}

/// A scalar field already pulled back to the unit disk.
using DiskField = std::function<double(Point2)>;

inline double metric_dX(const Region& a, const DiskField& fa, const Region& b,
                        const DiskField& fb, std::span<const Point2> eval_points,
                        const RegionMetric& cfg = {}) {
    if (eval_points.empty()) throw InvalidArgument("metric_dX needs evaluation points");
    double sup = 0.0;
    for (auto q : eval_points) sup = std::max(sup, std::abs(fa(q) - fb(q)));
    return metric_dU(a, b, cfg) + sup;
}

/// Boundary points at angles 2*pi*i/n about the centroid.
inline std::vector<Point2> discretize_phi(const Region& region, std::size_t n) {
    if (n < 3) throw InvalidArgument("discretization needs n >= 3");
    std::vector<Point2> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = kTwoPi * static_cast<double>(i) / static_cast<double>(n);
        out[i] = region.boundary_point(t);
    }
    return out;
}

/// Radii-only encoding: b(2*pi*i/n), i = 0..n-1.
inline std::vector<double> discretize_radii(const Region& region, std::size_t n) {
    if (n < 3) throw InvalidArgument("discretization needs n >= 3");
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = region.boundary_radius(kTwoPi * static_cast<double>(i) / static_cast<double>(n));
    return out;
}

inline Region reconstruct_psi(std::span<const Point2> points,
                              double lipschitz_bound = kDefaultLipschitzBound) {
    if (points.size() < 3) throw InvalidArgument("invalid polygon: fewer than 3 vertices");
    try {
        return Region::polygon(std::vector<Point2>(points.begin(), points.end()), lipschitz_bound);
    } catch (const InvalidArgument& e) {
        throw InvalidArgument(std::string("invalid polygon: ") + e.what());
    }
}

/// The projection psi_n(phi_n(region)).
inline Region project(const Region& region, std::size_t n) {
    const auto pts = discretize_phi(region, n);
    return reconstruct_psi(pts, region.lipschitz_bound());
}

inline double lipschitz_estimate(const Region& region, std::size_t grid = 4096) {
    if (grid < 256) throw InvalidArgument("lipschitz_estimate needs grid >= 256");
    const double dt = kTwoPi / static_cast<double>(grid);
    double best = 0.0;
    double prev = region.boundary_radius(0.0);
    const double first = prev;
    for (std::size_t i = 1; i <= grid; ++i) {
        const double b = i == grid ? first : region.boundary_radius(dt * static_cast<double>(i));
        best = std::max(best, std::abs(b - prev) / dt);
        prev = b;
    }
    return best;
}

}  // namespace vmionet
