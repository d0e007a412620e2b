#pragma once

// Triangular meshes of polar regions.
//
// Node rings are the boundary curve scaled about the centroid by k/R, i.e. the
// images of concentric circles of the unit disk under alpha_inv. Nodes on
// every ring are spaced uniformly in arc length, neighbouring rings are
// stitched together by a zipper sweep, and the result is improved by
// Laplacian smoothing and Lawson edge flips.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "vmionet/error.hpp"
#include "vmionet/geometry.hpp"

namespace vmionet {

using Triangle = std::array<std::uint32_t, 3>;

struct TriMesh {
    std::vector<Point2> nodes;
    std::vector<Triangle> triangles;  ///< counter-clockwise
    std::vector<std::uint32_t> boundary_nodes;
    Region region;
    double h = 0.0;

    [[nodiscard]] std::size_t node_count() const { return nodes.size(); }
};

inline double signed_area(Point2 a, Point2 b, Point2 c) { return 0.5 * cross(b - a, c - a); }

inline double signed_area(const TriMesh& m, const Triangle& t) {
    return signed_area(m.nodes[t[0]], m.nodes[t[1]], m.nodes[t[2]]);
}

/// Smallest interior angle of a triangle, in degrees.
inline double min_angle_deg(Point2 a, Point2 b, Point2 c) {
    auto ang = [](Point2 p, Point2 q, Point2 r) {
        const Point2 u = q - p;
        const Point2 v = r - p;
        return std::atan2(std::abs(cross(u, v)), dot(u, v));
    };
    const double m = std::min({ang(a, b, c), ang(b, c, a), ang(c, a, b)});
    return m * 180.0 / std::numbers::pi;
}

inline double min_angle_deg(const TriMesh& m) {
    double best = 180.0;
    for (const auto& t : m.triangles)
        best = std::min(best, min_angle_deg(m.nodes[t[0]], m.nodes[t[1]], m.nodes[t[2]]));
    return best;
}

inline double total_area(const TriMesh& m) {
    double a = 0.0;
    for (const auto& t : m.triangles) a += signed_area(m, t);
    return a;
}

inline constexpr double kMinMeshAngleDeg = 15.0;

namespace detail {

inline std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | b;
}

// Arc-length parametrization of the boundary curve seen from the centroid.
struct BoundaryTable {
    std::vector<double> theta;  // strictly increasing, starts at 0, ends at 2*pi
    std::vector<double> arc;    // cumulative arc length, arc.back() = perimeter
    std::vector<double> corners_arc;

    [[nodiscard]] double perimeter() const { return arc.back(); }

    [[nodiscard]] double theta_at(double s) const {
        const double p = perimeter();
        s = std::fmod(s, p);
        if (s < 0.0) s += p;
        auto it = std::upper_bound(arc.begin(), arc.end(), s);
        std::size_t k = static_cast<std::size_t>(it - arc.begin());
        k = std::clamp<std::size_t>(k, 1, arc.size() - 1);
        const double w = (s - arc[k - 1]) / (arc[k] - arc[k - 1]);
        return theta[k - 1] + w * (theta[k] - theta[k - 1]);
    }
};

inline BoundaryTable boundary_table(const Region& region) {
    constexpr std::size_t dense = 4096;
    BoundaryTable t;
    std::vector<double> thetas;
    thetas.reserve(dense + 16);
    for (std::size_t i = 0; i < dense; ++i) thetas.push_back(kTwoPi * static_cast<double>(i) / dense);
    const auto corners = region.corner_angles();
    thetas.insert(thetas.end(), corners.begin(), corners.end());
    std::sort(thetas.begin(), thetas.end());
    thetas.erase(std::unique(thetas.begin(), thetas.end(),
                             [](double a, double b) { return b - a < 1e-14; }),
                 thetas.end());
    thetas.push_back(kTwoPi);

    t.theta = thetas;
    t.arc.resize(thetas.size());
    t.arc[0] = 0.0;
    Point2 prev = region.boundary_point(thetas[0]);
    for (std::size_t i = 1; i < thetas.size(); ++i) {
        const Point2 p = region.boundary_point(thetas[i]);
        t.arc[i] = t.arc[i - 1] + distance(prev, p);
        prev = p;
    }
    for (double c : corners) {
        auto it = std::lower_bound(t.theta.begin(), t.theta.end(), c - 1e-14);
        t.corners_arc.push_back(t.arc[static_cast<std::size_t>(it - t.theta.begin())]);
    }
    return t;
}

struct Ring {
    std::vector<std::uint32_t> ids;
    std::vector<double> param;  // normalized arc length in [0,1), increasing
};

// Stitch two closed rings (both counter-clockwise) into a band of triangles.
inline void zipper(const Ring& inner, const Ring& outer, std::vector<Triangle>& out) {
    const std::size_t na = inner.ids.size();
    const std::size_t nb = outer.ids.size();
    const double a0 = inner.param[0];
    std::size_t j0 = 0;
    double best = 2.0;
    for (std::size_t j = 0; j < nb; ++j) {
        double d = std::abs(outer.param[j] - a0);
        d = std::min(d, 1.0 - d);
        if (d < best) {
            best = d;
            j0 = j;
        }
    }
    double offset = 0.0;
    if (outer.param[j0] - a0 > 0.5) offset = -1.0;
    if (outer.param[j0] - a0 < -0.5) offset = 1.0;

    auto va = [&](std::size_t i) {
        return inner.param[i % na] + static_cast<double>(i / na);
    };
    auto vb = [&](std::size_t j) {
        const std::size_t idx = j0 + j;
        return outer.param[idx % nb] + offset + static_cast<double>(idx / nb);
    };
    auto ida = [&](std::size_t i) { return inner.ids[i % na]; };
    auto idb = [&](std::size_t j) { return outer.ids[(j0 + j) % nb]; };

    std::size_t i = 0;
    std::size_t j = 0;
    while (i < na || j < nb) {
        bool advance_inner;
        if (i == na) advance_inner = false;
        else if (j == nb) advance_inner = true;
        else advance_inner = va(i + 1) < vb(j + 1);
        if (advance_inner) {
            out.push_back({ida(i), idb(j), ida(i + 1)});
            ++i;
        } else {
            out.push_back({ida(i), idb(j), idb(j + 1)});
            ++j;
        }
    }
}

inline double opposite_angle(Point2 apex, Point2 a, Point2 b) {
    const Point2 u = a - apex;
    const Point2 v = b - apex;
    return std::atan2(std::abs(cross(u, v)), dot(u, v));
}

// Lawson flips toward the constrained Delaunay triangulation of the node set
// with fixed boundary edges.
inline void delaunay_flips(TriMesh& m) {
    for (int sweep = 0; sweep < 50; ++sweep) {
        std::unordered_map<std::uint64_t, std::array<std::int64_t, 2>> edges;
        edges.reserve(m.triangles.size() * 3);
        for (std::size_t t = 0; t < m.triangles.size(); ++t) {
            for (int e = 0; e < 3; ++e) {
                const auto key = edge_key(m.triangles[t][e], m.triangles[t][(e + 1) % 3]);
                auto [it, inserted] = edges.try_emplace(key, std::array<std::int64_t, 2>{-1, -1});
                auto& slot = it->second;
                (slot[0] < 0 ? slot[0] : slot[1]) = static_cast<std::int64_t>(t);
            }
        }
        std::vector<char> touched(m.triangles.size(), 0);
        // Deterministic order: walk triangles and their edges in index order.
        int flips = 0;
        for (std::size_t t1 = 0; t1 < m.triangles.size(); ++t1) {
            if (touched[t1]) continue;
            for (int e = 0; e < 3; ++e) {
                const auto tri1 = m.triangles[t1];
                const std::uint32_t a = tri1[e];
                const std::uint32_t b = tri1[(e + 1) % 3];
                const std::uint32_t c = tri1[(e + 2) % 3];
                const auto& slot = edges.at(edge_key(a, b));
                if (slot[1] < 0) continue;
                const auto t2 = static_cast<std::size_t>(slot[0] == static_cast<std::int64_t>(t1)
                                                             ? slot[1]
                                                             : slot[0]);
                if (touched[t2]) continue;
                const auto tri2 = m.triangles[t2];
                std::uint32_t d = tri2[0];
                for (auto v : tri2)
                    if (v != a && v != b) d = v;
                const double sum = opposite_angle(m.nodes[c], m.nodes[a], m.nodes[b]) +
                                   opposite_angle(m.nodes[d], m.nodes[a], m.nodes[b]);
                if (sum <= std::numbers::pi + 1e-10) continue;
                const Triangle n1{c, a, d};
                const Triangle n2{d, b, c};
                if (signed_area(m, n1) <= 1e-14 || signed_area(m, n2) <= 1e-14) continue;
                m.triangles[t1] = n1;
                m.triangles[t2] = n2;
                touched[t1] = touched[t2] = 1;
                ++flips;
                break;
            }
        }
        if (flips == 0) return;
    }
}

inline void laplacian_smooth(TriMesh& m, const std::vector<char>& is_boundary, int passes) {
    std::vector<std::vector<std::uint32_t>> nbrs(m.nodes.size());
    for (const auto& t : m.triangles) {
        for (int e = 0; e < 3; ++e) {
            nbrs[t[e]].push_back(t[(e + 1) % 3]);
            nbrs[t[e]].push_back(t[(e + 2) % 3]);
        }
    }
    for (auto& v : nbrs) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    for (int pass = 0; pass < passes; ++pass) {
        std::vector<Point2> next = m.nodes;
        for (std::size_t i = 0; i < m.nodes.size(); ++i) {
            if (is_boundary[i] || nbrs[i].empty()) continue;
            Point2 s{};
            for (auto j : nbrs[i]) s = s + m.nodes[j];
            next[i] = (1.0 / static_cast<double>(nbrs[i].size())) * s;
        }
        m.nodes = std::move(next);
    }
}

}  // namespace detail

/// Triangulate a polar region with target edge length h.
inline TriMesh mesh_region(const Region& region, double h, double min_angle = kMinMeshAngleDeg) {
    const double diam = region.diameter_estimate();
    if (!(h >= 0.005 * diam * (1.0 - 1e-12) && h <= 0.2 * diam * (1.0 + 1e-12)))
        throw InvalidArgument("mesh size h must lie in [0.005, 0.2] x region diameter");

    const Point2 c = region.centroid();
    const auto table = detail::boundary_table(region);
    const double perimeter = table.perimeter();

    double mean_radius = 0.0;
    for (std::size_t i = 0; i + 1 < table.theta.size(); ++i)
        mean_radius += region.boundary_radius(table.theta[i]);
    mean_radius /= static_cast<double>(table.theta.size() - 1);
    const auto rings = static_cast<std::size_t>(std::max(2.0, std::round(mean_radius / h)));

    TriMesh mesh{{}, {}, {}, region, h};
    mesh.nodes.push_back(c);

    auto add_node = [&](Point2 p) {
        mesh.nodes.push_back(p);
        return static_cast<std::uint32_t>(mesh.nodes.size() - 1);
    };

    std::vector<detail::Ring> ring_list;
    for (std::size_t k = 1; k < rings; ++k) {
        const double rho = static_cast<double>(k) / static_cast<double>(rings);
        const auto n = static_cast<std::size_t>(std::max(6.0, std::round(rho * perimeter / h)));
        const double stagger = (k % 2 == 0) ? 0.5 : 0.0;
        detail::Ring ring;
        for (std::size_t j = 0; j < n; ++j) {
            const double s = (static_cast<double>(j) + stagger) / static_cast<double>(n);
            const double theta = table.theta_at(s * perimeter);
            ring.ids.push_back(add_node(c + (rho * region.boundary_radius(theta)) * unit_vector(theta)));
            ring.param.push_back(s);
        }
        ring_list.push_back(std::move(ring));
    }

    // Boundary ring: corners (if any) are kept, arcs between them are split
    // evenly in arc length.
    detail::Ring outer;
    {
        std::vector<double> breaks = table.corners_arc;
        if (breaks.empty()) breaks.push_back(0.0);
        std::sort(breaks.begin(), breaks.end());
        std::vector<double> params;
        for (std::size_t b = 0; b < breaks.size(); ++b) {
            const double s0 = breaks[b];
            const double s1 = b + 1 < breaks.size() ? breaks[b + 1] : breaks[0] + perimeter;
            const auto segs = static_cast<std::size_t>(std::max(1.0, std::round((s1 - s0) / h)));
            for (std::size_t j = 0; j < segs; ++j)
                params.push_back(s0 + (s1 - s0) * static_cast<double>(j) / static_cast<double>(segs));
        }
        if (breaks.size() == 1 && params.size() < 8) {
            params.clear();
            for (std::size_t j = 0; j < 8; ++j) params.push_back(perimeter * static_cast<double>(j) / 8.0);
        }
        std::vector<std::pair<double, Point2>> pts;
        const bool polygon = region.kind() == RegionKind::Polygon;
        const auto verts = region.vertices();
        const auto corners = region.corner_angles();
        for (double s : params) {
            const double sw = std::fmod(s, perimeter);
            Point2 p;
            if (polygon) {
                // Interpolate along the straight edge between bracketing corners.
                const auto& ca = table.corners_arc;
                std::size_t e = ca.size() - 1;
                if (sw >= ca.front() && sw < ca.back()) {
                    e = 0;
                    while (e + 1 < ca.size() && ca[e + 1] <= sw) ++e;
                }
                const Point2 va = region.boundary_point(corners[e]);
                const Point2 vb = region.boundary_point(corners[(e + 1) % corners.size()]);
                const double len = distance(va, vb);
                double off = sw - ca[e];
                if (off < 0.0) off += perimeter;
                p = va + (off / len) * (vb - va);
                // Snap exact corners onto the vertex coordinates.
                for (auto v : verts)
                    if (distance(v, p) < 1e-12) p = v;
            } else {
                const double theta = table.theta_at(sw);
                p = c + region.boundary_radius(theta) * unit_vector(theta);
            }
            pts.emplace_back(sw / perimeter, p);
        }
        std::sort(pts.begin(), pts.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
        for (const auto& [param, p] : pts) {
            outer.ids.push_back(add_node(p));
            outer.param.push_back(param);
        }
    }

    // Center fan, then bands between consecutive rings.
    {
        const auto& first = ring_list.empty() ? outer : ring_list.front();
        const std::size_t n = first.ids.size();
        for (std::size_t j = 0; j < n; ++j)
            mesh.triangles.push_back({0u, first.ids[j], first.ids[(j + 1) % n]});
    }
    for (std::size_t k = 0; k + 1 < ring_list.size(); ++k)
        detail::zipper(ring_list[k], ring_list[k + 1], mesh.triangles);
    if (!ring_list.empty()) detail::zipper(ring_list.back(), outer, mesh.triangles);

    std::vector<char> is_boundary(mesh.nodes.size(), 0);
    for (auto id : outer.ids) is_boundary[id] = 1;
    mesh.boundary_nodes = outer.ids;
    std::sort(mesh.boundary_nodes.begin(), mesh.boundary_nodes.end());

    detail::delaunay_flips(mesh);
    detail::laplacian_smooth(mesh, is_boundary, 2);
    detail::delaunay_flips(mesh);

    for (const auto& t : mesh.triangles)
        if (!(signed_area(mesh, t) >= 1e-12))
            throw NumericalFailure("mesh quality: inverted or degenerate triangle");
    const double worst = min_angle_deg(mesh);
    if (worst < min_angle)
        throw NumericalFailure("mesh quality: minimum angle " + std::to_string(worst) + " deg");
    return mesh;
}

/// Edges used by exactly one triangle, oriented counter-clockwise.
inline std::vector<std::array<std::uint32_t, 2>> boundary_edges(const TriMesh& m) {
    std::unordered_map<std::uint64_t, int> count;
    count.reserve(m.triangles.size() * 3);
    for (const auto& t : m.triangles)
        for (int e = 0; e < 3; ++e) ++count[detail::edge_key(t[e], t[(e + 1) % 3])];
    std::vector<std::array<std::uint32_t, 2>> out;
    for (const auto& t : m.triangles)
        for (int e = 0; e < 3; ++e)
            if (count[detail::edge_key(t[e], t[(e + 1) % 3])] == 1) out.push_back({t[e], t[(e + 1) % 3]});
    return out;
}

/// Number of triangles sharing each edge must be 1 (boundary) or 2 (interior).
inline bool is_conforming(const TriMesh& m) {
    std::unordered_map<std::uint64_t, int> count;
    for (const auto& t : m.triangles)
        for (int e = 0; e < 3; ++e) ++count[detail::edge_key(t[e], t[(e + 1) % 3])];
    for (const auto& [k, n] : count)
        if (n < 1 || n > 2) return false;
    return true;
}

}  // namespace vmionet
