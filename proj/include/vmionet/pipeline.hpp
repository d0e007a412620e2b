#pragma once

// End-to-end orchestration: random tasks are generated on physical regions,
// solved with P1 FEM and pulled back to the unit disk through alpha_inv.
// Trained models only ever see disk-side encodings:
//   region radii | (k on disk points) | f on disk points | (g on circle)
// and predict u on the disk, which is pushed forward again through alpha.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "vmionet/error.hpp"
#include "vmionet/fem.hpp"
#include "vmionet/generators.hpp"
#include "vmionet/geometry.hpp"
#include "vmionet/io.hpp"
#include "vmionet/mesh.hpp"
#include "vmionet/mionet.hpp"
#include "vmionet/rng.hpp"
#include "vmionet/sampling.hpp"
#include "vmionet/train.hpp"

namespace vmionet {

enum class RegionFamily { Smooth, Polygon4, Polygon5, Polygon6, Polygon };
enum class Variant { Simple, Full };

inline std::string to_string(RegionFamily f) {
    switch (f) {
        case RegionFamily::Smooth: return "smooth";
        case RegionFamily::Polygon4: return "polygon4";
        case RegionFamily::Polygon5: return "polygon5";
        case RegionFamily::Polygon6: return "polygon6";
        case RegionFamily::Polygon: return "polygon";
    }
    return "smooth";
}

inline RegionFamily family_from_string(const std::string& s) {
    if (s == "smooth") return RegionFamily::Smooth;
    if (s == "polygon4" || s == "quadrilateral") return RegionFamily::Polygon4;
    if (s == "polygon5" || s == "pentagon") return RegionFamily::Polygon5;
    if (s == "polygon6" || s == "hexagon") return RegionFamily::Polygon6;
    if (s == "polygon") return RegionFamily::Polygon;
    throw InvalidArgument("unknown region family '" + s + "'");
}

inline std::string to_string(Variant v) { return v == Variant::Simple ? "simple" : "full"; }

inline Variant variant_from_string(const std::string& s) {
    if (s == "simple") return Variant::Simple;
    if (s == "full") return Variant::Full;
    throw InvalidArgument("unknown variant '" + s + "'");
}

struct DatasetConfig {
    std::size_t tasks = 100;
    RegionFamily family = RegionFamily::Smooth;
    Variant variant = Variant::Simple;
    std::size_t disk_points = 5000;      ///< M
    std::size_t radii = 200;             ///< n_b
    std::size_t boundary_values = 200;   ///< n_g (full variant)
    std::size_t eval_points = 2000;      ///< E, for error evaluation
    double h = 0.02;
    GPConfig source = default_source_gp();
    GPConfig log_coefficient{Kernel::RBF, 0.2, 0.25, 1e-8, 0};
    GPConfig boundary_data{Kernel::PeriodicRBF, 1.0, 1.0, 1e-8, 0};
    SmoothRegionConfig smooth{};
    PolygonConfig polygon{};
    std::uint64_t seed = 0;        ///< task seed
    std::uint64_t point_seed = 0;  ///< disk point set and evaluation points
    double test_fraction = 0.1;
    unsigned threads = 1;
};

inline constexpr int kTaskRetries = 3;

/// Uniform random points in the closed unit disk.
inline std::vector<Point2> uniform_disk_points(std::size_t n, std::uint64_t seed, std::string_view tag) {
    RandomStream rng(seed, 0, tag);
    std::vector<Point2> out(n);
    for (auto& q : out) {
        const double r = std::sqrt(rng.uniform());
        const double t = kTwoPi * rng.uniform();
        q = r * unit_vector(t);
    }
    return out;
}

inline std::vector<Point2> disk_point_set(const DatasetConfig& c) {
    return uniform_disk_points(c.disk_points, c.point_seed, "disk-points");
}

inline std::vector<Point2> eval_point_set(const DatasetConfig& c) {
    return uniform_disk_points(c.eval_points, c.point_seed, "eval-points");
}

inline std::vector<double> uniform_angles(std::size_t n) {
    std::vector<double> a(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = kTwoPi * static_cast<double>(i) / static_cast<double>(n);
    return a;
}

/// A fully materialized task on its physical region.
struct Task {
    Region region;
    TriMesh mesh;
    NodalField k;
    NodalField f;
    std::vector<double> g;  ///< Dirichlet values aligned with mesh.boundary_nodes
    std::function<double(double)> g_of_angle;  ///< boundary data as a function of angle
    NodalField u;
};

struct TaskRecord {
    std::vector<double> radii;
    std::vector<double> k;  ///< full variant only
    std::vector<double> f;
    std::vector<double> g;  ///< full variant only
    std::vector<double> u;
    std::vector<double> u_eval;
    std::size_t task_index = 0;
    int attempt = 0;
};

inline Region generate_region(const DatasetConfig& c, std::uint64_t seed, std::size_t index) {
    switch (c.family) {
        case RegionFamily::Smooth: return random_smooth_region(seed, c.smooth);
        case RegionFamily::Polygon4: return random_convex_polygon(4, seed, c.polygon);
        case RegionFamily::Polygon5: return random_convex_polygon(5, seed, c.polygon);
        case RegionFamily::Polygon6: return random_convex_polygon(6, seed, c.polygon);
        case RegionFamily::Polygon: return random_convex_polygon(4 + static_cast<int>(index % 3), seed, c.polygon);
    }
    throw InvalidArgument("unknown region family");
}

/// Angles of points about a centre, wrapped to [0, 2*pi).
inline std::vector<double> angles_about(std::span<const Point2> pts, Point2 c) {
    std::vector<double> a(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) a[i] = wrap_angle(angle_of(pts[i] - c));
    return a;
}

/// One periodic GP draw evaluated jointly at a set of angles; duplicate angles
/// share a value.
inline std::vector<double> periodic_draw(std::span<const double> angles, const GPConfig& cfg) {
    std::vector<double> uniq(angles.begin(), angles.end());
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    const auto vals = gp_sample(uniq, cfg);
    std::vector<double> out(angles.size());
    for (std::size_t i = 0; i < angles.size(); ++i) {
        const auto it = std::lower_bound(uniq.begin(), uniq.end(), angles[i]);
        out[i] = vals[static_cast<std::size_t>(it - uniq.begin())];
    }
    return out;
}

/// Solve the PDE on an assembled task.
inline void solve_task(Task& t) { t.u = solve_poisson(t.mesh, t.k, t.f, t.g); }

/// Generate and solve task `index` for one attempt. Throws on failure.
inline Task generate_task_attempt(const DatasetConfig& c, std::size_t index, int attempt) {
    const std::uint64_t base = derive_seed(c.seed, index, "task");
    const std::uint64_t s = derive_seed(base, static_cast<std::uint64_t>(attempt), "attempt");
    Region region = generate_region(c, derive_seed(s, 0, "region"), index);
    TriMesh mesh = mesh_region(region, c.h);
    NodalField f{gp_sample(mesh.nodes, c.source.with_seed(derive_seed(s, 0, "source")))};
    Task t{region, std::move(mesh), {}, std::move(f), {}, {}, {}};
    if (c.variant == Variant::Full) {
        auto logk = gp_sample(t.mesh.nodes, c.log_coefficient.with_seed(derive_seed(s, 0, "coefficient")));
        for (auto& v : logk) v = std::exp(v);
        t.k = NodalField{std::move(logk)};

        // Boundary data is one periodic draw over the union of boundary-node
        // angles and the uniform encoding angles.
        std::vector<Point2> bpts;
        for (auto id : t.mesh.boundary_nodes) bpts.push_back(t.mesh.nodes[id]);
        auto angles = angles_about(bpts, region.centroid());
        const auto enc = uniform_angles(c.boundary_values);
        std::vector<double> all = angles;
        all.insert(all.end(), enc.begin(), enc.end());
        const auto gcfg = c.boundary_data.with_seed(derive_seed(s, 0, "boundary-data"));
        auto vals = periodic_draw(all, gcfg);
        t.g.assign(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(angles.size()));
        // Lookup of the drawn values by angle; arbitrary angles use periodic
        // linear interpolation between the drawn samples.
        std::vector<std::pair<double, double>> table;
        for (std::size_t i = 0; i < all.size(); ++i) table.emplace_back(all[i], vals[i]);
        std::sort(table.begin(), table.end());
        table.erase(std::unique(table.begin(), table.end(),
                                [](const auto& a, const auto& b) { return a.first == b.first; }),
                    table.end());
        t.g_of_angle = [table](double theta) {
            const double a = wrap_angle(theta);
            auto it = std::lower_bound(table.begin(), table.end(), std::make_pair(a, -1e300));
            if (it != table.end() && it->first == a) return it->second;
            const auto& hi = it == table.end() ? table.front() : *it;
            const auto& lo = it == table.begin() ? table.back() : *(it - 1);
            double span = hi.first - lo.first;
            double off = a - lo.first;
            if (span <= 0.0) span += kTwoPi;
            if (off < 0.0) off += kTwoPi;
            return lo.second + (hi.second - lo.second) * off / span;
        };
    } else {
        t.k = constant_field(t.mesh, 1.0);
        t.g.assign(t.mesh.boundary_nodes.size(), 0.0);
        t.g_of_angle = [](double) { return 0.0; };
    }
    solve_task(t);
    return t;
}

struct GeneratedTask {
    Task task;
    int attempt;
};

/// Task `index` with up to kTaskRetries derived-seed retries.
inline GeneratedTask generate_task(const DatasetConfig& c, std::size_t index) {
    std::string last;
    for (int attempt = 0; attempt <= kTaskRetries; ++attempt) {
        try {
            return {generate_task_attempt(c, index, attempt), attempt};
        } catch (const Error& e) {
            last = e.what();
        }
    }
    throw NumericalFailure("task " + std::to_string(index) + " failed: " + last);
}

/// Tolerance used when pulling fields back: disk points mapped through the
/// exact region may fall in the thin sliver between a curved boundary and
/// the mesh polygon.
inline double pullback_tolerance(const TriMesh& m) { return m.h; }

/// Evaluate a nodal field at alpha_inv(q) for each disk point q.
inline std::vector<double> pull_back(const PointLocator& loc, const Region& region,
                                     std::span<const double> values, std::span<const Point2> disk,
                                     double tol) {
    std::vector<double> out(disk.size());
    for (std::size_t j = 0; j < disk.size(); ++j)
        out[j] = loc.evaluate(values, alpha_inv(region, disk[j]), tol);
    return out;
}

/// Disk-side encoding of a solved task.
inline TaskRecord encode_task(const Task& t, Variant variant, std::span<const Point2> disk,
                              std::span<const Point2> eval, std::size_t n_radii,
                              std::size_t n_boundary) {
    TaskRecord r;
    const PointLocator loc(t.mesh);
    const double tol = pullback_tolerance(t.mesh);
    r.radii = discretize_radii(t.region, n_radii);
    r.f = pull_back(loc, t.region, t.f.values, disk, tol);
    r.u = pull_back(loc, t.region, t.u.values, disk, tol);
    r.u_eval = pull_back(loc, t.region, t.u.values, eval, tol);
    if (variant == Variant::Full) {
        r.k = pull_back(loc, t.region, t.k.values, disk, tol);
        r.g.resize(n_boundary);
        const auto ang = uniform_angles(n_boundary);
        for (std::size_t i = 0; i < n_boundary; ++i) r.g[i] = t.g_of_angle(ang[i]);
    }
    return r;
}

struct Dataset {
    DatasetConfig config;
    std::vector<Point2> disk_points;
    std::vector<Point2> eval_points;
    std::vector<TaskRecord> records;
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Deterministic split by task index: a seeded permutation, last
/// round(test_fraction * N) entries form the test split.
inline void assign_split(Dataset& d) {
    const std::size_t n = d.records.size();
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    RandomStream rng(d.config.seed, 0, "split");
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[static_cast<std::size_t>(rng.below(i))]);
    const auto n_test = static_cast<std::size_t>(std::llround(d.config.test_fraction * static_cast<double>(n)));
    d.train.assign(perm.begin(), perm.end() - static_cast<std::ptrdiff_t>(n_test));
    d.test.assign(perm.end() - static_cast<std::ptrdiff_t>(n_test), perm.end());
    std::sort(d.train.begin(), d.train.end());
    std::sort(d.test.begin(), d.test.end());
}

inline unsigned resolve_threads(unsigned requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("VMIONET_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return static_cast<unsigned>(v);
    }
    return 1;
}

/// Run fn(i) for i in [0, n) on up to `threads` workers.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
    for (auto& t : pool) t.join();
}

inline void validate(const DatasetConfig& c) {
    if (c.tasks == 0) throw InvalidArgument("dataset needs at least one task");
    if (c.disk_points == 0) throw InvalidArgument("dataset needs disk points");
    if (c.radii < 3) throw InvalidArgument("region encoding needs at least 3 radii");
    if (c.variant == Variant::Full && c.boundary_values < 3)
        throw InvalidArgument("boundary encoding needs at least 3 values");
    if (!(c.test_fraction >= 0.0 && c.test_fraction <= 1.0))
        throw InvalidArgument("test fraction must lie in [0, 1]");
    validate(c.source);
    validate(c.log_coefficient);
    validate(c.boundary_data);
}

inline Dataset build_dataset(const DatasetConfig& c) {
    validate(c);
    Dataset d;
    d.config = c;
    d.disk_points = disk_point_set(c);
    d.eval_points = eval_point_set(c);
    d.records.resize(c.tasks);
    std::vector<std::string> failures(c.tasks);
    parallel_for(c.tasks, resolve_threads(c.threads), [&](std::size_t i) {
        try {
            auto [task, attempt] = generate_task(c, i);
            d.records[i] = encode_task(task, c.variant, d.disk_points, d.eval_points, c.radii,
                                       c.boundary_values);
            d.records[i].task_index = i;
            d.records[i].attempt = attempt;
        } catch (const Error& e) {
            failures[i] = e.what();
        }
    });
    std::string bad;
    for (std::size_t i = 0; i < c.tasks; ++i)
        if (!failures[i].empty()) bad += (bad.empty() ? "" : ", ") + std::to_string(i);
    if (!bad.empty()) throw NumericalFailure("dataset build failed for tasks: " + bad);
    assign_split(d);
    return d;
}

/// Companion held-out set of freshly generated tasks: same disk and
/// evaluation points, independent task seed, everything in the test split.
inline DatasetConfig fresh_test_config(const DatasetConfig& c, std::size_t tasks) {
    DatasetConfig f = c;
    f.tasks = tasks;
    f.seed = derive_seed(c.seed, 0, "fresh-test");
    f.test_fraction = 1.0;
    return f;
}

// ------------------------------------------------------------ record layout

struct Segment {
    std::string name;
    std::size_t offset;
    std::size_t length;
};

inline std::vector<Segment> record_layout(const DatasetConfig& c) {
    std::vector<Segment> s;
    std::size_t off = 0;
    auto add = [&](const char* name, std::size_t n) {
        s.push_back({name, off, n});
        off += n;
    };
    add("radii", c.radii);
    if (c.variant == Variant::Full) add("k", c.disk_points);
    add("f", c.disk_points);
    if (c.variant == Variant::Full) add("g", c.boundary_values);
    add("u", c.disk_points);
    add("u_eval", c.eval_points);
    return s;
}

inline std::size_t record_length(const DatasetConfig& c) {
    const auto s = record_layout(c);
    return s.back().offset + s.back().length;
}

// ------------------------------------------------------------ serialization

inline json to_json(const GPConfig& g) {
    return {{"kernel", to_string(g.kernel)},
            {"lengthscale", g.lengthscale},
            {"variance", g.variance},
            {"jitter", g.jitter},
            {"seed", g.seed}};
}

inline GPConfig gp_from_json(const json& j) {
    return {kernel_from_string(j.at("kernel").get<std::string>()), j.at("lengthscale").get<double>(),
            j.at("variance").get<double>(), j.at("jitter").get<double>(), j.at("seed").get<std::uint64_t>()};
}

inline json to_json(const DatasetConfig& c) {
    return {{"tasks", c.tasks},
            {"family", to_string(c.family)},
            {"variant", to_string(c.variant)},
            {"disk_points", c.disk_points},
            {"radii", c.radii},
            {"boundary_values", c.boundary_values},
            {"eval_points", c.eval_points},
            {"h", c.h},
            {"source_gp", to_json(c.source)},
            {"log_coefficient_gp", to_json(c.log_coefficient)},
            {"boundary_data_gp", to_json(c.boundary_data)},
            {"smooth_region",
             {{"boundary_gp", to_json(c.smooth.boundary)},
              {"base_radius", c.smooth.base_radius},
              {"amplitude", c.smooth.amplitude},
              {"samples", c.smooth.samples},
              {"lipschitz_bound", c.smooth.lipschitz_bound}}},
            {"polygon",
             {{"min_interior_angle_deg", c.polygon.min_interior_angle_deg},
              {"min_area", c.polygon.min_area},
              {"lipschitz_bound", c.polygon.lipschitz_bound}}},
            {"seed", c.seed},
            {"point_seed", c.point_seed},
            {"test_fraction", c.test_fraction}};
}

inline DatasetConfig dataset_config_from_json(const json& j) {
    DatasetConfig c;
    c.tasks = j.at("tasks").get<std::size_t>();
    c.family = family_from_string(j.at("family").get<std::string>());
    c.variant = variant_from_string(j.at("variant").get<std::string>());
    c.disk_points = j.at("disk_points").get<std::size_t>();
    c.radii = j.at("radii").get<std::size_t>();
    c.boundary_values = j.at("boundary_values").get<std::size_t>();
    c.eval_points = j.at("eval_points").get<std::size_t>();
    c.h = j.at("h").get<double>();
    c.source = gp_from_json(j.at("source_gp"));
    c.log_coefficient = gp_from_json(j.at("log_coefficient_gp"));
    c.boundary_data = gp_from_json(j.at("boundary_data_gp"));
    const auto& s = j.at("smooth_region");
    c.smooth.boundary = gp_from_json(s.at("boundary_gp"));
    c.smooth.base_radius = s.at("base_radius").get<double>();
    c.smooth.amplitude = s.at("amplitude").get<double>();
    c.smooth.samples = s.at("samples").get<std::size_t>();
    c.smooth.lipschitz_bound = s.at("lipschitz_bound").get<double>();
    const auto& p = j.at("polygon");
    c.polygon.min_interior_angle_deg = p.at("min_interior_angle_deg").get<double>();
    c.polygon.min_area = p.at("min_area").get<double>();
    c.polygon.lipschitz_bound = p.at("lipschitz_bound").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.point_seed = j.at("point_seed").get<std::uint64_t>();
    c.test_fraction = j.at("test_fraction").get<double>();
    return c;
}

inline json points_to_json(std::span<const Point2> pts) {
    json a = json::array();
    for (auto p : pts) a.push_back({p.x, p.y});
    return a;
}

inline std::vector<Point2> points_from_json(const json& j) {
    std::vector<Point2> out;
    out.reserve(j.size());
    for (const auto& p : j) out.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    return out;
}

inline json dataset_manifest(const Dataset& d) {
    json layout = json::array();
    for (const auto& s : record_layout(d.config))
        layout.push_back({{"name", s.name}, {"offset", s.offset}, {"length", s.length}});
    json prov = json::array();
    for (const auto& r : d.records) prov.push_back({{"task", r.task_index}, {"attempt", r.attempt}});
    return {{"format", "vmionet-dataset-1"},
            {"config", to_json(d.config)},
            {"record_count", d.records.size()},
            {"record_length", record_length(d.config)},
            {"record_layout", layout},
            {"records_file", "records.bin"},
            {"byte_order", "little"},
            {"value_type", "float64"},
            {"disk_points", points_to_json(d.disk_points)},
            {"eval_points", points_to_json(d.eval_points)},
            {"split", {{"train", d.train}, {"test", d.test}}},
            {"provenance", prov}};
}

inline void write_dataset(const Dataset& d, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_text(dir / "manifest.json", dataset_manifest(d).dump(1));
    std::ofstream os(dir / "records.bin", std::ios::binary);
    if (!os) throw Error("cannot open records.bin for writing");
    for (const auto& r : d.records) {
        write_le<double>(os, r.radii);
        if (d.config.variant == Variant::Full) write_le<double>(os, r.k);
        write_le<double>(os, r.f);
        if (d.config.variant == Variant::Full) write_le<double>(os, r.g);
        write_le<double>(os, r.u);
        write_le<double>(os, r.u_eval);
    }
}

inline Dataset read_dataset(const std::filesystem::path& dir) {
    const json m = json::parse(read_text(dir / "manifest.json"));
    Dataset d;
    d.config = dataset_config_from_json(m.at("config"));
    d.disk_points = points_from_json(m.at("disk_points"));
    d.eval_points = points_from_json(m.at("eval_points"));
    d.train = m.at("split").at("train").get<std::vector<std::size_t>>();
    d.test = m.at("split").at("test").get<std::vector<std::size_t>>();
    const auto count = m.at("record_count").get<std::size_t>();
    const auto len = m.at("record_length").get<std::size_t>();
    if (len != record_length(d.config)) throw Error("manifest record length disagrees with its config");
    std::ifstream is(dir / "records.bin", std::ios::binary);
    if (!is) throw Error("cannot open records.bin");
    const auto& prov = m.at("provenance");
    d.records.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        auto& r = d.records[i];
        r.radii = read_le<double>(is, d.config.radii);
        if (d.config.variant == Variant::Full) r.k = read_le<double>(is, d.config.disk_points);
        r.f = read_le<double>(is, d.config.disk_points);
        if (d.config.variant == Variant::Full) r.g = read_le<double>(is, d.config.boundary_values);
        r.u = read_le<double>(is, d.config.disk_points);
        r.u_eval = read_le<double>(is, d.config.eval_points);
        r.task_index = prov.at(i).at("task").get<std::size_t>();
        r.attempt = prov.at(i).at("attempt").get<int>();
    }
    return d;
}

// ------------------------------------------------------------ models

struct ModelConfig {
    std::size_t width = 128;
    std::size_t hidden_layers = 4;
    std::size_t rank = 128;  ///< p
    bool output_bias = false;
    std::uint64_t seed = 0;
};

inline std::vector<std::size_t> relu_sizes(std::size_t in, const ModelConfig& m) {
    std::vector<std::size_t> s{in};
    for (std::size_t l = 0; l < m.hidden_layers; ++l) s.push_back(m.width);
    s.push_back(m.rank);
    return s;
}

/// Simple: [radii MLP, linear f]. Full: [radii MLP, k MLP, linear (f,g)].
inline MIONetSpec make_model_spec(Variant v, std::size_t n_radii, std::size_t m, std::size_t n_g,
                                  const ModelConfig& mc) {
    MIONetSpec s;
    s.branches.push_back(MLPSpec::relu(relu_sizes(n_radii, mc)));
    if (v == Variant::Simple) {
        s.branches.push_back(MLPSpec::linear(m, mc.rank));
    } else {
        s.branches.push_back(MLPSpec::relu(relu_sizes(m, mc)));
        s.branches.push_back(MLPSpec::linear(m + n_g, mc.rank));
    }
    s.trunk = MLPSpec::relu(relu_sizes(2, mc));
    s.output_bias = mc.output_bias;
    return s;
}

/// A trained network plus the disk-side encoding it expects.
/// The network is fit to u / output_scale, so solutions of size ~0.01 do not
/// leave every gradient below Adam's epsilon.
struct ModelBundle {
    MIONetModel model;
    Variant variant = Variant::Simple;
    std::vector<Point2> disk_points;
    std::size_t radii = 200;
    std::size_t boundary_values = 200;
    double output_scale = 1.0;

    [[nodiscard]] Matrix forward(const std::vector<Matrix>& inputs, const Matrix& y) const {
        return output_scale * model.forward(inputs, y);
    }
    [[nodiscard]] std::vector<double> forward(const std::vector<std::vector<double>>& inputs,
                                              std::span<const Point2> y) const {
        auto out = model.forward(inputs, y);
        for (double& v : out) v *= output_scale;
        return out;
    }
};

/// RMS of u over the training records; 1 when that is zero.
inline double target_scale(const Dataset& d) {
    double s = 0.0;
    std::size_t n = 0;
    for (auto i : d.train.empty() ? d.test : d.train) {
        for (double u : d.records[i].u) s += u * u;
        n += d.records[i].u.size();
    }
    const double r = n ? std::sqrt(s / static_cast<double>(n)) : 0.0;
    return r > 0.0 && std::isfinite(r) ? r : 1.0;
}

inline ModelBundle make_bundle(const Dataset& d, const ModelConfig& mc) {
    const auto& c = d.config;
    return {MIONetModel(make_model_spec(c.variant, c.radii, c.disk_points, c.boundary_values, mc), mc.seed),
            c.variant, d.disk_points, c.radii, c.boundary_values, target_scale(d)};
}

inline json bundle_metadata(const ModelBundle& b) {
    return {{"variant", to_string(b.variant)},
            {"radii", b.radii},
            {"boundary_values", b.boundary_values},
            {"output_scale", b.output_scale},
            {"disk_points", points_to_json(b.disk_points)}};
}

inline void save_bundle(const std::filesystem::path& path, const ModelBundle& b, CheckpointInfo info) {
    info.metadata = bundle_metadata(b);
    save_checkpoint(path, b.model, info);
}

inline ModelBundle load_bundle(const std::filesystem::path& path, CheckpointInfo* info = nullptr) {
    auto ck = load_checkpoint(path);
    const auto& m = ck.info.metadata;
    ModelBundle b{std::move(ck.model), variant_from_string(m.at("variant").get<std::string>()),
                  points_from_json(m.at("disk_points")), m.at("radii").get<std::size_t>(),
                  m.at("boundary_values").get<std::size_t>(), m.value("output_scale", 1.0)};
    if (info) *info = ck.info;
    return b;
}

inline void check_compatible(const ModelBundle& b, const Dataset& d) {
    if (b.variant != d.config.variant) throw InvalidArgument("model and dataset variants differ");
    if (b.disk_points != d.disk_points)
        throw InvalidArgument("model and dataset use different disk point sets");
    if (b.radii != d.config.radii) throw InvalidArgument("model and dataset radii counts differ");
    if (b.variant == Variant::Full && b.boundary_values != d.config.boundary_values)
        throw InvalidArgument("model and dataset boundary encodings differ");
}

/// Branch inputs of one record, in model order.
inline std::vector<std::vector<double>> branch_inputs(const TaskRecord& r, Variant v) {
    if (v == Variant::Simple) return {r.radii, r.f};
    std::vector<double> fg = r.f;
    fg.insert(fg.end(), r.g.begin(), r.g.end());
    return {r.radii, r.k, fg};
}

/// Targets are divided by `scale` (pass the bundle's output_scale).
inline TrainingSet training_set(const Dataset& d, std::span<const std::size_t> indices, double scale = 1.0) {
    TrainingSet ts;
    if (indices.empty()) throw InvalidArgument("training split is empty");
    const auto first = branch_inputs(d.records[indices[0]], d.config.variant);
    const auto n = static_cast<Eigen::Index>(indices.size());
    for (const auto& v : first) ts.inputs.emplace_back(static_cast<Eigen::Index>(v.size()), n);
    ts.targets.resize(n, static_cast<Eigen::Index>(d.config.disk_points));
    for (Eigen::Index c = 0; c < n; ++c) {
        const auto& r = d.records[indices[static_cast<std::size_t>(c)]];
        const auto in = branch_inputs(r, d.config.variant);
        for (std::size_t b = 0; b < in.size(); ++b)
            ts.inputs[b].col(c) = Eigen::Map<const Vector>(in[b].data(), static_cast<Eigen::Index>(in[b].size()));
        ts.targets.row(c) = Eigen::Map<const Eigen::RowVectorXd>(r.u.data(), static_cast<Eigen::Index>(r.u.size()));
    }
    if (scale != 1.0) ts.targets /= scale;
    ts.trunk_points = MIONetModel::points_matrix(d.disk_points);
    return ts;
}

// ------------------------------------------------------------ prediction

using PlaneField = std::function<double(Point2)>;
using AngleField = std::function<double(double)>;

/// Wrap a nodal field as a callable (the mesh must outlive the result).
inline PlaneField field_function(const TriMesh& mesh, const NodalField& field,
                                 double snap_tolerance = kSnapTolerance) {
    auto loc = std::make_shared<PointLocator>(mesh);
    auto values = std::make_shared<std::vector<double>>(field.values);
    return [loc, values, snap_tolerance](Point2 p) { return loc->evaluate(*values, p, snap_tolerance); };
}

/// Disk-side inputs for a region and source: radii and f(alpha_inv(q_j)).
inline std::vector<std::vector<double>> encode_inputs(const ModelBundle& b, const Region& region,
                                                      const PlaneField& f) {
    std::vector<double> fv(b.disk_points.size());
    for (std::size_t j = 0; j < fv.size(); ++j) fv[j] = f(alpha_inv(region, b.disk_points[j]));
    return {discretize_radii(region, b.radii), std::move(fv)};
}

inline std::vector<Point2> to_disk(const Region& region, std::span<const Point2> pts) {
    std::vector<Point2> y(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) y[i] = alpha(region, pts[i]);
    return y;
}

/// u on physical query points: encode (region, f) on the disk, run the
/// network at alpha(query). No mesh of the region is needed.
inline std::vector<double> predict_solution(const ModelBundle& b, const Region& region,
                                            const PlaneField& f, std::span<const Point2> query) {
    if (b.variant != Variant::Simple) throw InvalidArgument("predict_solution needs a simple-variant model");
    return b.forward(encode_inputs(b, region, f), to_disk(region, query));
}

/// Fully-parameterized prediction: branches (radii, k, (f, g)).
inline std::vector<std::vector<double>> encode_full_inputs(const ModelBundle& b, const Region& region,
                                                           const PlaneField& k, const PlaneField& f,
                                                           const AngleField& g) {
    const std::size_t m = b.disk_points.size();
    std::vector<double> kv(m);
    std::vector<double> fg(m + b.boundary_values);
    for (std::size_t j = 0; j < m; ++j) {
        const Point2 p = alpha_inv(region, b.disk_points[j]);
        kv[j] = k(p);
        if (!(kv[j] > 0.0)) throw InvalidArgument("coefficient k must be positive");
        fg[j] = f(p);
    }
    const auto ang = uniform_angles(b.boundary_values);
    for (std::size_t i = 0; i < ang.size(); ++i) fg[m + i] = g(ang[i]);
    return {discretize_radii(region, b.radii), std::move(kv), std::move(fg)};
}

inline std::vector<double> predict_full(const ModelBundle& b, const Region& region, const PlaneField& k,
                                        const PlaneField& f, const AngleField& g,
                                        std::span<const Point2> query) {
    if (b.variant != Variant::Full) throw InvalidArgument("predict_full needs a full-variant model");
    return b.forward(encode_full_inputs(b, region, k, f, g), to_disk(region, query));
}

// ------------------------------------------------------------ evaluation

struct ErrorSummary {
    double mean_l2 = 0.0;
    double mean_relative_l2 = 0.0;
    std::size_t tasks = 0;
    std::size_t skipped = 0;
};

inline double rms(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s / static_cast<double>(v.size()));
}

/// Monte-Carlo L2 and relative L2 errors over the dataset's evaluation
/// points, averaged over the given records. `predict(record)` returns the
/// prediction at those points.
inline ErrorSummary summarize_errors(const Dataset& d, std::span<const std::size_t> indices,
                                     const std::function<std::vector<double>(const TaskRecord&)>& predict,
                                     std::ostream* warn = &std::cerr) {
    ErrorSummary s;
    for (auto i : indices) {
        const auto& r = d.records[i];
        const auto pred = predict(r);
        std::vector<double> err(pred.size());
        for (std::size_t j = 0; j < pred.size(); ++j) err[j] = pred[j] - r.u_eval[j];
        const double truth = rms(r.u_eval);
        if (truth == 0.0) {
            ++s.skipped;
            if (warn) *warn << "warning: task " << r.task_index << " has a zero solution; skipped\n";
            continue;
        }
        const double l2 = rms(err);
        s.mean_l2 += l2;
        s.mean_relative_l2 += l2 / truth;
        ++s.tasks;
    }
    if (s.tasks > 0) {
        s.mean_l2 /= static_cast<double>(s.tasks);
        s.mean_relative_l2 /= static_cast<double>(s.tasks);
    }
    return s;
}

inline ErrorSummary evaluate_errors(const ModelBundle& b, const Dataset& d,
                                    std::span<const std::size_t> indices, std::size_t eval_count) {
    if (eval_count < 100) throw InvalidArgument("evaluation needs at least 100 points");
    if (eval_count != d.eval_points.size())
        throw InvalidArgument("dataset stores " + std::to_string(d.eval_points.size()) +
                              " evaluation points, not " + std::to_string(eval_count));
    check_compatible(b, d);
    const Matrix y = MIONetModel::points_matrix(d.eval_points);
    return summarize_errors(d, indices, [&](const TaskRecord& r) {
        std::vector<Matrix> in;
        for (const auto& v : branch_inputs(r, d.config.variant))
            in.emplace_back(Eigen::Map<const Matrix>(v.data(), static_cast<Eigen::Index>(v.size()), 1));
        const Matrix out = b.forward(in, y);
        return std::vector<double>(out.data(), out.data() + out.size());
    });
}

// ------------------------------------------------------------ mesh influence

struct DiscretizationLevel {
    std::size_t boundary_points;
    double h;
};

inline std::vector<DiscretizationLevel> default_levels() { return {{100, 0.01}, {50, 0.02}, {25, 0.04}}; }

struct LevelResult {
    DiscretizationLevel level;
    std::size_t nodes = 0;
    double l2 = 0.0;
    double relative_l2 = 0.0;
    std::vector<double> prediction;  ///< at the evaluation disk points
};

struct MeshInfluenceResult {
    std::vector<LevelResult> levels;
    /// pairwise[a][b] = ||pred_a - pred_b|| / ||pred_a|| over the disk points.
    std::vector<std::vector<double>> pairwise;

    [[nodiscard]] double max_pairwise() const {
        double m = 0.0;
        for (const auto& row : pairwise)
            for (double v : row) m = std::max(m, v);
        return m;
    }
};

/// Re-discretize one task's region (psi_n(phi_n(region)) meshed at h) for each
/// level, move f onto each new mesh, predict there and compare.
inline MeshInfluenceResult mesh_influence_experiment(const ModelBundle& b, const Task& task,
                                                     std::span<const Point2> eval_points,
                                                     const std::vector<DiscretizationLevel>& levels = default_levels()) {
    if (b.variant != Variant::Simple) throw InvalidArgument("mesh influence needs a simple-variant model");
    MeshInfluenceResult res;
    const PointLocator source_loc(task.mesh);
    for (const auto& lv : levels) {
        const Region poly = project(task.region, lv.boundary_points);
        const TriMesh mesh = mesh_region(poly, lv.h);
        // The polygon can poke out of a curved boundary by the chord sag.
        const double tol = std::max(lv.h, task.mesh.h);
        NodalField f{std::vector<double>(mesh.node_count())};
        for (std::size_t i = 0; i < mesh.node_count(); ++i)
            f.values[i] = source_loc.evaluate(task.f.values, mesh.nodes[i], tol);
        const NodalField u = solve_poisson(mesh, constant_field(mesh, 1.0), f,
                                           std::vector<double>(mesh.boundary_nodes.size(), 0.0));

        LevelResult lr;
        lr.level = lv;
        lr.nodes = mesh.node_count();
        const PlaneField fn = field_function(mesh, f, tol);
        lr.prediction = b.forward(encode_inputs(b, poly, fn), eval_points);
        const PointLocator loc(mesh);
        const auto truth = pull_back(loc, poly, u.values, eval_points, tol);
        std::vector<double> err(truth.size());
        for (std::size_t j = 0; j < truth.size(); ++j) err[j] = lr.prediction[j] - truth[j];
        lr.l2 = rms(err);
        lr.relative_l2 = lr.l2 / rms(truth);
        res.levels.push_back(std::move(lr));
    }
    const std::size_t n = res.levels.size();
    res.pairwise.assign(n, std::vector<double>(n, 0.0));
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t c = 0; c < n; ++c) {
            if (a == c) continue;
            const auto& pa = res.levels[a].prediction;
            const auto& pc = res.levels[c].prediction;
            std::vector<double> diff(pa.size());
            for (std::size_t j = 0; j < pa.size(); ++j) diff[j] = pa[j] - pc[j];
            res.pairwise[a][c] = rms(diff) / rms(pa);
        }
    return res;
}

}  // namespace vmionet
