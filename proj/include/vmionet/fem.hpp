#pragma once

// P1 finite elements for -div(k grad u) = f with Dirichlet data, and
// barycentric evaluation of nodal fields at arbitrary points.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>

#include "vmionet/error.hpp"
#include "vmionet/geometry.hpp"
#include "vmionet/mesh.hpp"

namespace vmionet {

/// Piecewise-linear scalar field: one value per mesh node.
struct NodalField {
    std::vector<double> values;

    [[nodiscard]] std::size_t size() const { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }
};

inline NodalField constant_field(const TriMesh& mesh, double c) {
    return {std::vector<double>(mesh.node_count(), c)};
}

template <class Fn>
NodalField interpolate(const TriMesh& mesh, Fn&& fn) {
    NodalField out{std::vector<double>(mesh.node_count())};
    for (std::size_t i = 0; i < mesh.node_count(); ++i) out.values[i] = fn(mesh.nodes[i]);
    return out;
}

inline void check_field(const TriMesh& mesh, const NodalField& f, const char* name) {
    if (f.size() != mesh.node_count())
        throw InvalidArgument(std::string(name) + ": field length does not match node count");
    for (double v : f.values)
        if (!std::isfinite(v)) throw InvalidArgument(std::string(name) + ": non-finite value");
}

using SparseMatrix = Eigen::SparseMatrix<double>;

namespace detail {

struct ElementGeometry {
    std::array<Point2, 3> grad;  // gradients of the barycentric basis functions
    double area;
};

inline ElementGeometry element_geometry(const TriMesh& m, const Triangle& t) {
    const Point2 a = m.nodes[t[0]];
    const Point2 b = m.nodes[t[1]];
    const Point2 c = m.nodes[t[2]];
    const double a2 = cross(b - a, c - a);
    // grad(lambda_i) = perp(opposite edge) / (2 * area)
    return {{Point2{(b.y - c.y) / a2, (c.x - b.x) / a2},
             Point2{(c.y - a.y) / a2, (a.x - c.x) / a2},
             Point2{(a.y - b.y) / a2, (b.x - a.x) / a2}},
            0.5 * a2};
}

inline double element_coefficient(const NodalField& k, const Triangle& t) {
    return (k[t[0]] + k[t[1]] + k[t[2]]) / 3.0;
}

}  // namespace detail

/// Full stiffness matrix with elementwise-constant k (mean of nodal values).
inline SparseMatrix assemble_stiffness(const TriMesh& mesh, const NodalField& k) {
    check_field(mesh, k, "k");
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(mesh.triangles.size() * 9);
    for (const auto& t : mesh.triangles) {
        const auto g = detail::element_geometry(mesh, t);
        const double ke = detail::element_coefficient(k, t) * g.area;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                trip.emplace_back(t[i], t[j], ke * dot(g.grad[i], g.grad[j]));
    }
    const auto n = static_cast<Eigen::Index>(mesh.node_count());
    SparseMatrix a(n, n);
    a.setFromTriplets(trip.begin(), trip.end());
    return a;
}

/// Row-lumped mass vector: each triangle gives area/3 to its nodes.
inline std::vector<double> lumped_mass(const TriMesh& mesh) {
    std::vector<double> w(mesh.node_count(), 0.0);
    for (const auto& t : mesh.triangles) {
        const double a3 = signed_area(mesh, t) / 3.0;
        for (auto v : t) w[v] += a3;
    }
    return w;
}

struct PoissonReport {
    NodalField u;
    int iterations = 0;
    double relative_residual = 0.0;
};

inline constexpr double kCgTolerance = 1e-10;

/// Solve -div(k grad u) = f, u = g on boundary_nodes (g aligned with
/// mesh.boundary_nodes). Dirichlet rows are eliminated; the reduced SPD
/// system is solved by Jacobi-preconditioned conjugate gradients.
inline PoissonReport solve_poisson_report(const TriMesh& mesh, const NodalField& k,
                                          const NodalField& f, std::span<const double> g) {
    check_field(mesh, k, "k");
    check_field(mesh, f, "f");
    for (double v : k.values)
        if (!(v > 0.0)) throw InvalidArgument("coefficient k must be positive");
    if (g.size() != mesh.boundary_nodes.size())
        throw InvalidArgument("boundary data length does not match boundary node count");

    const std::size_t n = mesh.node_count();
    std::vector<double> dirichlet(n, 0.0);
    std::vector<char> fixed(n, 0);
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!std::isfinite(g[i])) throw InvalidArgument("g: non-finite value");
        fixed[mesh.boundary_nodes[i]] = 1;
        dirichlet[mesh.boundary_nodes[i]] = g[i];
    }
    std::vector<Eigen::Index> reduced(n, -1);
    Eigen::Index free_count = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (!fixed[i]) reduced[i] = free_count++;

    PoissonReport report{NodalField{dirichlet}, 0, 0.0};
    if (free_count == 0) return report;

    const auto mass = lumped_mass(mesh);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(free_count);
    for (std::size_t i = 0; i < n; ++i)
        if (!fixed[i]) rhs(reduced[i]) = mass[i] * f[i];

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(mesh.triangles.size() * 9);
    for (const auto& t : mesh.triangles) {
        const auto geo = detail::element_geometry(mesh, t);
        const double ke = detail::element_coefficient(k, t) * geo.area;
        for (int i = 0; i < 3; ++i) {
            if (fixed[t[i]]) continue;
            for (int j = 0; j < 3; ++j) {
                const double v = ke * dot(geo.grad[i], geo.grad[j]);
                if (fixed[t[j]]) rhs(reduced[t[i]]) -= v * dirichlet[t[j]];
                else trip.emplace_back(reduced[t[i]], reduced[t[j]], v);
            }
        }
    }
    SparseMatrix a(free_count, free_count);
    a.setFromTriplets(trip.begin(), trip.end());

    Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper,
                             Eigen::DiagonalPreconditioner<double>>
        cg;
    cg.setTolerance(kCgTolerance);
    cg.setMaxIterations(20 * free_count);
    cg.compute(a);
    Eigen::VectorXd x = cg.solve(rhs);
    if (cg.info() != Eigen::Success)
        throw NumericalFailure("conjugate gradients did not converge: relative residual " +
                               std::to_string(cg.error()) + " after " +
                               std::to_string(cg.iterations()) + " iterations");

    for (std::size_t i = 0; i < n; ++i)
        if (!fixed[i]) report.u.values[i] = x(reduced[i]);
    report.iterations = static_cast<int>(cg.iterations());
    const double bn = rhs.norm();
    report.relative_residual = bn > 0.0 ? (a * x - rhs).norm() / bn : 0.0;
    return report;
}

inline NodalField solve_poisson(const TriMesh& mesh, const NodalField& k, const NodalField& f,
                                std::span<const double> g) {
    return solve_poisson_report(mesh, k, f, g).u;
}

inline constexpr double kSnapTolerance = 1e-7;

/// Point location on a triangle mesh with a uniform background grid.
class PointLocator {
public:
    explicit PointLocator(const TriMesh& mesh) : mesh_(&mesh) {
        lo_ = {1e300, 1e300};
        Point2 hi{-1e300, -1e300};
        for (auto p : mesh.nodes) {
            lo_ = {std::min(lo_.x, p.x), std::min(lo_.y, p.y)};
            hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
        }
        const double side =
            std::max(std::sqrt(static_cast<double>(mesh.triangles.size())), 1.0);
        nx_ = static_cast<std::size_t>(std::ceil(side));
        ny_ = nx_;
        cw_ = std::max(hi.x - lo_.x, 1e-300) / static_cast<double>(nx_);
        ch_ = std::max(hi.y - lo_.y, 1e-300) / static_cast<double>(ny_);

        std::vector<std::vector<std::uint32_t>> cells(nx_ * ny_);
        for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
            const auto& tri = mesh.triangles[t];
            Point2 a = mesh.nodes[tri[0]], b = a;
            for (auto v : tri) {
                a = {std::min(a.x, mesh.nodes[v].x), std::min(a.y, mesh.nodes[v].y)};
                b = {std::max(b.x, mesh.nodes[v].x), std::max(b.y, mesh.nodes[v].y)};
            }
            const auto [i0, j0] = cell_of(a);
            const auto [i1, j1] = cell_of(b);
            for (std::size_t j = j0; j <= j1; ++j)
                for (std::size_t i = i0; i <= i1; ++i)
                    cells[j * nx_ + i].push_back(static_cast<std::uint32_t>(t));
        }
        offsets_.assign(cells.size() + 1, 0);
        for (std::size_t c = 0; c < cells.size(); ++c)
            offsets_[c + 1] = offsets_[c] + cells[c].size();
        items_.reserve(offsets_.back());
        for (const auto& c : cells) items_.insert(items_.end(), c.begin(), c.end());
        edges_ = boundary_edges(mesh);
    }

    struct Hit {
        std::uint32_t triangle;
        std::array<double, 3> bary;
    };

    [[nodiscard]] std::optional<Hit> locate(Point2 p) const {
        if (!(p.x >= lo_.x - 1e-12 && p.y >= lo_.y - 1e-12 &&
              p.x <= lo_.x + cw_ * static_cast<double>(nx_) + 1e-12 &&
              p.y <= lo_.y + ch_ * static_cast<double>(ny_) + 1e-12))
            return std::nullopt;
        const auto [i, j] = cell_of(p);
        const std::size_t c = j * nx_ + i;
        for (std::size_t k = offsets_[c]; k < offsets_[c + 1]; ++k) {
            const auto t = items_[k];
            const auto& tri = mesh_->triangles[t];
            const Point2 a = mesh_->nodes[tri[0]];
            const Point2 b = mesh_->nodes[tri[1]];
            const Point2 cc = mesh_->nodes[tri[2]];
            const double a2 = cross(b - a, cc - a);
            const double l0 = cross(b - p, cc - p) / a2;
            const double l1 = cross(cc - p, a - p) / a2;
            const double l2 = 1.0 - l0 - l1;
            constexpr double eps = -1e-12;
            if (l0 >= eps && l1 >= eps && l2 >= eps) return Hit{t, {l0, l1, l2}};
        }
        return std::nullopt;
    }

    /// Barycentric interpolation; points outside the mesh but within
    /// snap_tolerance of a boundary edge are projected onto it.
    [[nodiscard]] double evaluate(std::span<const double> values, Point2 p,
                                  double snap_tolerance = kSnapTolerance) const {
        if (auto hit = locate(p)) {
            const auto& tri = mesh_->triangles[hit->triangle];
            return hit->bary[0] * values[tri[0]] + hit->bary[1] * values[tri[1]] +
                   hit->bary[2] * values[tri[2]];
        }
        double best = 1e300;
        double value = 0.0;
        for (const auto& e : edges_) {
            const Point2 a = mesh_->nodes[e[0]];
            const Point2 b = mesh_->nodes[e[1]];
            const Point2 d = b - a;
            const double s = std::clamp(dot(p - a, d) / dot(d, d), 0.0, 1.0);
            const double dist = distance(p, a + s * d);
            if (dist < best) {
                best = dist;
                value = (1.0 - s) * values[e[0]] + s * values[e[1]];
            }
        }
        if (best > snap_tolerance) throw InvalidArgument("point outside mesh");
        return value;
    }

    [[nodiscard]] const TriMesh& mesh() const { return *mesh_; }

private:
    [[nodiscard]] std::pair<std::size_t, std::size_t> cell_of(Point2 p) const {
        auto clampi = [](double v, std::size_t n) {
            if (!(v > 0.0)) return std::size_t{0};
            return std::min(static_cast<std::size_t>(v), n - 1);
        };
        return {clampi((p.x - lo_.x) / cw_, nx_), clampi((p.y - lo_.y) / ch_, ny_)};
    }

    const TriMesh* mesh_;
    Point2 lo_;
    double cw_ = 1.0, ch_ = 1.0;
    std::size_t nx_ = 1, ny_ = 1;
    std::vector<std::size_t> offsets_;
    std::vector<std::uint32_t> items_;
    std::vector<std::array<std::uint32_t, 2>> edges_;
};

inline std::vector<double> eval_field(const TriMesh& mesh, const NodalField& field,
                                      std::span<const Point2> points,
                                      double snap_tolerance = kSnapTolerance) {
    check_field(mesh, field, "field");
    const PointLocator loc(mesh);
    std::vector<double> out(points.size());
    for (std::size_t i = 0; i < points.size(); ++i)
        out[i] = loc.evaluate(field.values, points[i], snap_tolerance);
    return out;
}

}  // namespace vmionet
