// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails. Pass criterion numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>

#include "support.hpp"
#include "vmionet/fem.hpp"
#include "vmionet/generators.hpp"
#include "vmionet/geometry.hpp"
#include "vmionet/io.hpp"
#include "vmionet/mesh.hpp"
#include "vmionet/pipeline.hpp"
#include "vmionet/train.hpp"

using namespace vmionet;
using namespace vmionet::testing;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::string file_bytes(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

const fs::path& work_dir() {
    static const fs::path p = [] {
        fs::path d = fs::temp_directory_path() / "vmionet-acceptance";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return p;
}

// ------------------------------------------------------------------ 1

double disk_exact(Point2 p) { return 0.25 * (1.0 - dot(p, p)); }

double disk_l2_error(double h, double* max_nodal = nullptr) {
    const Region disk = Region::disk({0, 0}, 1.0, 256);
    const TriMesh m = mesh_region(disk, h);
    const NodalField u = solve_poisson(m, constant_field(m, 1.0), constant_field(m, 1.0),
                                       std::vector<double>(m.boundary_nodes.size(), 0.0));
    if (max_nodal) {
        *max_nodal = 0.0;
        for (std::size_t i = 0; i < m.node_count(); ++i) *max_nodal = std::max(*max_nodal, std::abs(u[i] - disk_exact(m.nodes[i])));
    }
    double s = 0.0;
    for (const auto& t : m.triangles) {
        const double a = signed_area(m, t);
        for (int e = 0; e < 3; ++e) {
            const auto i = t[e], j = t[(e + 1) % 3];
            const double d = 0.5 * (u[i] + u[j]) - disk_exact(0.5 * (m.nodes[i] + m.nodes[j]));
            s += a / 3.0 * d * d;
        }
    }
    return std::sqrt(s);
}

Outcome criterion1() {
    const auto t0 = Clock::now();
    double nodal = 0.0;
    (void)disk_l2_error(0.05, &nodal);
    const double e08 = disk_l2_error(0.08), e04 = disk_l2_error(0.04);
    const double order = std::log2(e08 / e04);
    const double secs = seconds_since(t0);
    const bool ok = nodal <= 2 * 0.05 * 0.05 && order >= 1.8 && secs < 30.0;
    return {ok, "max nodal error " + fmt(nodal) + " (limit 0.005), L2 order " + fmt(order) + " (>= 1.8), " + fmt(secs) + " s (< 30)"};
}

// ------------------------------------------------------------------ 2

Outcome criterion2() {
    const auto t0 = Clock::now();
    RandomStream rng(2024, 0, "round-trip");
    double worst = 0.0;
    for (int r = 0; r < 100; ++r) {
        const Region reg = r % 2 ? random_smooth_region(derive_seed(2, r, "region"))
                                 : random_convex_polygon(4 + (r / 2) % 3, derive_seed(2, r, "region"));
        for (int i = 0; i < 10000; ++i) {
            const Point2 q = std::sqrt(rng.uniform()) * unit_vector(kTwoPi * rng.uniform());
            worst = std::max(worst, norm(alpha(reg, alpha_inv(reg, q)) - q));
        }
    }
    const double secs = seconds_since(t0);
    return {worst < 1e-9 && secs < 10.0, "max |alpha(alpha_inv(q)) - q| = " + fmt(worst) + " (< 1e-9), " + fmt(secs) + " s (< 10)"};
}

// ------------------------------------------------------------------ 3

Outcome criterion3() {
    const auto t0 = Clock::now();
    const std::vector<std::size_t> ns{8, 16, 32, 64, 128, 256};
    std::vector<Region> regions;
    for (int i = 0; i < 50; ++i) regions.push_back(random_smooth_region(derive_seed(3, i, "region")));
    std::vector<double> mean(ns.size(), 0.0);
    for (std::size_t k = 0; k < ns.size(); ++k) {
        for (const auto& r : regions) mean[k] += metric_dU(r, project(r, ns[k]));
        mean[k] /= static_cast<double>(regions.size());
    }
    bool decreasing = true;
    for (std::size_t k = 1; k < ns.size(); ++k) decreasing = decreasing && mean[k] < mean[k - 1];
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t k = 0; k < ns.size(); ++k) {
        const double x = std::log(static_cast<double>(ns[k])), y = std::log(mean[k]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double nn = static_cast<double>(ns.size());
    const double slope = (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
    const Region disk = Region::disk({0, 0}, 1.0, 512);
    double disk_err = 0.0;
    for (auto n : ns) disk_err = std::max(disk_err, std::abs(metric_dU(disk, project(disk, n)) - (1.0 - std::cos(std::numbers::pi / n))));
    const double secs = seconds_since(t0);
    std::string means;
    for (double m : mean) means += (means.empty() ? "" : ", ") + fmt(m);
    return {decreasing && slope <= -0.8 && disk_err < 1e-6 && secs < 60.0,
            "mean d_U [" + means + "], decreasing " + (decreasing ? "yes" : "no") + ", slope " + fmt(slope) +
                " (<= -0.8), disk closed-form error " + fmt(disk_err) + " (< 1e-6), " + fmt(secs) + " s (< 60)"};
}

// ------------------------------------------------------------------ 4

Outcome criterion4() {
    const auto t0 = Clock::now();
    RandomStream rng(4, 0, "gradient-check");
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
        MIONetModel m(random_small_spec(rng), rng.next_u64());
        // Zero-initialized biases can leave pre-activations exactly on a ReLU kink.
        m.parameters() += random_matrix(m.parameters().size(), 1, rng, 0.5);
        std::vector<Matrix> in;
        const auto batch = static_cast<Eigen::Index>(1 + rng.below(4));
        for (const auto& b : m.spec().branches) in.push_back(random_matrix(static_cast<Eigen::Index>(b.input_width()), batch, rng));
        const Matrix y = random_disk_points(5, rng);
        const Matrix up = random_matrix(batch, 5, rng);
        worst = std::max(worst, gradient_check(m, in, y, up));
    }
    const double secs = seconds_since(t0);
    return {worst < 1e-5 && secs < 60.0, "max finite-difference relative error " + fmt(worst) + " (< 1e-5), " + fmt(secs) + " s (< 60)"};
}

// ------------------------------------------------------------------ 5

double superposition_error(const MIONetModel& m, std::size_t linear_branch, RandomStream& rng) {
    std::vector<Matrix> in;
    for (const auto& b : m.spec().branches) in.push_back(random_matrix(static_cast<Eigen::Index>(b.input_width()), 1, rng));
    const Matrix y = random_disk_points(200, rng);
    const Matrix f1 = random_matrix(in[linear_branch].rows(), 1, rng), f2 = random_matrix(in[linear_branch].rows(), 1, rng);
    const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
    auto with = [&](const Matrix& f) {
        auto v = in;
        v[linear_branch] = f;
        return m.forward(v, y);
    };
    const Matrix lhs = with(a * f1 + b * f2), rhs = a * with(f1) + b * with(f2);
    return (lhs - rhs).norm() / rhs.norm();
}

Outcome criterion5() {
    RandomStream rng(5, 0, "linearity");
    ModelConfig mc;
    mc.seed = 55;
    const MIONetModel simple(make_model_spec(Variant::Simple, 200, 800, 200, mc), mc.seed);
    const MIONetModel full(make_model_spec(Variant::Full, 200, 800, 200, mc), mc.seed);
    double es = 0.0, ef = 0.0;
    for (int t = 0; t < 5; ++t) {
        es = std::max(es, superposition_error(simple, 1, rng));
        ef = std::max(ef, superposition_error(full, 2, rng));
    }
    return {es <= 1e-12 && ef <= 1e-12, "relative superposition error simple " + fmt(es) + ", full " + fmt(ef) + " (<= 1e-12)"};
}

// ------------------------------------------------------------------ 6, 7, 9

DatasetConfig desk_config() {
    DatasetConfig c;
    c.tasks = 300;
    c.family = RegionFamily::Smooth;
    c.variant = Variant::Simple;
    c.disk_points = 800;
    c.eval_points = 2000;
    c.test_fraction = 0.0;  // evaluation uses freshly generated tasks
    c.seed = 6;
    c.point_seed = 60;
    return c;
}

ModelConfig desk_model() {
    ModelConfig mc;
    mc.width = 128;
    mc.hidden_layers = 4;
    mc.rank = 128;
    mc.seed = derive_seed(6, 0, "init");
    return mc;
}

TrainConfig desk_training() {
    TrainConfig tc;
    tc.lr = 1e-3;
    tc.iterations = 50000;
    tc.batch_size = 16;
    tc.seed = derive_seed(6, 0, "batch");
    return tc;
}

struct DeskRun {
    fs::path dir;
    ModelBundle bundle;
    TrainResult result;
    double seconds;
};

DeskRun desk_run(const std::string& name) {
    const auto t0 = Clock::now();
    const fs::path dir = work_dir() / name;
    const Dataset d = build_dataset(desk_config());
    write_dataset(d, dir / "dataset");
    ModelBundle b = make_bundle(d, desk_model());
    const TrainResult r = train(b.model, training_set(d, d.train, b.output_scale), desk_training());
    save_bundle(dir / "model.ckpt", b, {6, r.iterations, r.final_loss, {}});
    return {dir, std::move(b), r, seconds_since(t0)};
}

/// Loss at iteration 100 over the mean of the last ten logged batch losses.
double loss_drop(const TrainResult& r) {
    const std::size_t tail = std::min<std::size_t>(10, r.history.size());
    double s = 0.0;
    for (std::size_t i = r.history.size() - tail; i < r.history.size(); ++i) s += r.history[i].loss;
    return r.history.front().loss / (s / static_cast<double>(tail));
}

std::optional<DeskRun>& first_run() {
    static std::optional<DeskRun> run;
    if (!run) run = desk_run("desk-a");
    return run;
}

Outcome criterion6() {
    const DeskRun& run = *first_run();
    const DatasetConfig fresh = fresh_test_config(desk_config(), 50);
    const Dataset test = build_dataset(fresh);
    const ErrorSummary e = evaluate_errors(run.bundle, test, test.test, test.eval_points.size());
    const double drop = loss_drop(run.result);
    const bool ok = e.mean_relative_l2 <= 0.15 && drop >= 10.0 && e.tasks == 50;
    return {ok, "mean relative L2 on 50 fresh tasks " + fmt(e.mean_relative_l2) + " (<= 0.15), mean L2 " + fmt(e.mean_l2) +
                    ", loss drop " + fmt(drop) + "x (>= 10), train+data " + fmt(run.seconds) + " s (target < 7200)"};
}

Outcome criterion7() {
    const DeskRun& run = *first_run();
    const DatasetConfig fresh = fresh_test_config(desk_config(), 50);
    const Task task = generate_task(fresh, 0).task;
    const auto eval = eval_point_set(fresh);
    const MeshInfluenceResult r = mesh_influence_experiment(run.bundle, task, eval);
    std::string rows;
    for (const auto& lv : r.levels)
        rows += (rows.empty() ? "" : ", ") + std::to_string(lv.level.boundary_points) + "/" + fmt(lv.level.h) + ": rel L2 " + fmt(lv.relative_l2);
    return {r.max_pairwise() <= 0.05, "max pairwise prediction difference " + fmt(r.max_pairwise()) + " (<= 0.05); " + rows};
}

Outcome criterion9() {
    const DeskRun& a = *first_run();
    const DeskRun b = desk_run("desk-b");
    bool same_history = a.result.history.size() == b.result.history.size();
    for (std::size_t i = 0; same_history && i < a.result.history.size(); ++i)
        same_history = a.result.history[i].iteration == b.result.history[i].iteration &&
                       a.result.history[i].loss == b.result.history[i].loss;
    const bool same_ckpt = file_bytes(a.dir / "model.ckpt") == file_bytes(b.dir / "model.ckpt");
    const bool same_data = file_bytes(a.dir / "dataset" / "records.bin") == file_bytes(b.dir / "dataset" / "records.bin") &&
                           file_bytes(a.dir / "dataset" / "manifest.json") == file_bytes(b.dir / "dataset" / "manifest.json");
    return {same_history && same_ckpt,
            std::string("loss history ") + (same_history ? "identical" : "differs") + ", checkpoint " +
                (same_ckpt ? "byte-identical" : "differs") + ", dataset " + (same_data ? "byte-identical" : "differs")};
}

// ------------------------------------------------------------------ 8

Outcome criterion8() {
    DatasetConfig c = desk_config();
    c.tasks = 100;
    c.variant = Variant::Full;
    c.seed = 8;
    c.point_seed = 80;
    const Dataset d = build_dataset(c);
    ModelConfig mc = desk_model();
    mc.seed = derive_seed(8, 0, "init");
    ModelBundle b = make_bundle(d, mc);
    const std::size_t third = b.model.spec().branches.at(2).input_width();
    const bool shape = third == c.disk_points + c.boundary_values && b.model.spec().branches[2].linear_only;

    RandomStream rng(8, 0, "superposition");
    const double sup_before = superposition_error(b.model, 2, rng);

    TrainConfig tc = desk_training();
    tc.seed = derive_seed(8, 0, "batch");
    const TrainResult r = train(b.model, training_set(d, d.train, b.output_scale), tc);
    const double drop = loss_drop(r);
    const double sup_after = superposition_error(b.model, 2, rng);

    // f = 0, g = c, k = 1 has the exact solution u = c.
    double worst = 0.0, mean = 0.0;
    const auto eval = eval_point_set(c);
    const int cases = 10;
    for (int i = 0; i < cases; ++i) {
        const Region reg = random_smooth_region(derive_seed(8, i, "family-region"));
        const double cval = (i % 2 ? 1.0 : -1.0) * (0.25 + 0.75 * rng.uniform());
        std::vector<Point2> q;
        for (auto p : eval) q.push_back(alpha_inv(reg, p));
        const auto pred = predict_full(b, reg, [](Point2) { return 1.0; }, [](Point2) { return 0.0; },
                                       [cval](double) { return cval; }, q);
        double se = 0.0;
        for (double v : pred) se += (v - cval) * (v - cval);
        const double rel = std::sqrt(se / static_cast<double>(pred.size())) / std::abs(cval);
        worst = std::max(worst, rel);
        mean += rel / cases;
    }
    const double sup = std::max(sup_before, sup_after);
    const bool ok = shape && sup <= 1e-12 && drop >= 10.0 && worst <= 0.2;
    return {ok, "third branch width " + std::to_string(third) + " (= M + n_g = " + std::to_string(c.disk_points + c.boundary_values) +
                    "), (f, g) superposition " + fmt(sup) + " (<= 1e-12), loss drop " + fmt(drop) +
                    "x (>= 10), constant-boundary relative L2 max " + fmt(worst) + " mean " + fmt(mean) + " (<= 0.2)"};
}

}  // namespace

int main(int argc, char** argv) {
    const std::map<int, std::pair<std::string, std::function<Outcome()>>> criteria{
        {1, {"FEM oracle", criterion1}},
        {2, {"transform round trip", criterion2}},
        {3, {"projection convergence", criterion3}},
        {4, {"gradient correctness", criterion4}},
        {5, {"linearity", criterion5}},
        {6, {"desk-scale operator learning", criterion6}},
        {7, {"mesh influence", criterion7}},
        {8, {"fully-parameterized variant", criterion8}},
        {9, {"determinism", criterion9}},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
    if (selected.empty())
        for (const auto& [k, _] : criteria) selected.insert(k);

    int failures = 0;
    std::ofstream report("acceptance-results.txt");
    for (int k : selected) {
        const auto it = criteria.find(k);
        if (it == criteria.end()) continue;
        Outcome o;
        try {
            o = it->second.second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        failures += o.pass ? 0 : 1;
        std::ostringstream line;
        line << (o.pass ? "PASS" : "FAIL") << " criterion " << k << " (" << it->second.first << "): " << o.detail;
        std::cout << line.str() << std::endl;
        report << line.str() << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
