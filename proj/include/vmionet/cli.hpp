#pragma once

// Command-line front end. Every subcommand writes resolved-config.json into
// its --out directory next to whatever else it produces.
//
// Exit status: 0 success, 1 usage error, 2 runtime failure.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "vmionet/generators.hpp"
#include "vmionet/geometry.hpp"
#include "vmionet/io.hpp"
#include "vmionet/pipeline.hpp"
#include "vmionet/train.hpp"

namespace vmionet::cli {

namespace fs = std::filesystem;

/// Config files may be TOML/INI or JSON; JSON is recognised by a leading '{'.
/// Nested JSON objects name subcommands, e.g. {"seed": 3, "train": {"lr": 1e-3}}.
class AutoConfig : public CLI::ConfigTOML {
public:
    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        std::string text{std::istreambuf_iterator<char>(input), std::istreambuf_iterator<char>()};
        const auto first = text.find_first_not_of(" \t\r\n");
        if (first == std::string::npos || text[first] != '{') {
            std::istringstream is(text);
            return CLI::ConfigTOML::from_config(is);
        }
        std::vector<CLI::ConfigItem> out;
        flatten(out, json::parse(text), "", {});
        return out;
    }

private:
    static std::string scalar(const json& v) {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
        return v.dump();
    }

    static void flatten(std::vector<CLI::ConfigItem>& out, const json& j, const std::string& name,
                        std::vector<std::string> parents) {
        if (j.is_object()) {
            if (!name.empty()) parents.push_back(name);
            for (auto it = j.begin(); it != j.end(); ++it) flatten(out, *it, it.key(), parents);
            return;
        }
        CLI::ConfigItem item;
        item.parents = std::move(parents);
        item.name = name;
        if (j.is_array()) {
            for (const auto& v : j) item.inputs.push_back(scalar(v));
        } else {
            item.inputs.push_back(scalar(j));
        }
        out.push_back(std::move(item));
    }
};

struct Globals {
    std::uint64_t seed = 0;
    unsigned threads = 0;
};

inline json option_snapshot(const CLI::App& app) {
    json j = json::object();
    for (const CLI::Option* opt : app.get_options()) {
        if (opt->get_lnames().empty()) continue;
        const std::string& name = opt->get_lnames().front();
        if (name == "help" || name == "config") continue;
        if (opt->count() > 0) {
            const auto& r = opt->results();
            j[name] = r.size() == 1 ? json(r.front()) : json(r);
        } else {
            j[name] = opt->get_default_str();
        }
    }
    return j;
}

inline void write_resolved(const fs::path& out, const CLI::App& app, const CLI::App& sub,
                           const Globals& g, const json& resolved) {
    fs::create_directories(out);
    json j;
    j["command"] = sub.get_name();
    j["seed"] = g.seed;
    j["threads"] = resolve_threads(g.threads);
    j["global_options"] = option_snapshot(app);
    j["options"] = option_snapshot(sub);
    j["resolved"] = resolved;
    write_text(out / "resolved-config.json", j.dump(2) + "\n");
}

inline std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

inline RegionFamily parse_family(const std::string& s) { return family_from_string(s); }

inline Region region_for_index(RegionFamily family, std::uint64_t seed, std::size_t i,
                               const DatasetConfig& defaults = {}) {
    DatasetConfig c = defaults;
    c.family = family;
    return generate_region(c, derive_seed(seed, i, "region"), i);
}

/// |p - c| / b(theta); <= 1 exactly on the closed region.
inline double alpha_radius(const Region& r, Point2 p) {
    const Point2 d = p - r.centroid();
    const double n = norm(d);
    if (n == 0.0) return 0.0;
    return n / r.boundary_radius(angle_of(d));
}

struct Grid {
    std::vector<Point2> points;
    std::vector<char> inside;
};

inline Grid region_grid(const Region& r, std::size_t n) {
    const auto [lo, hi] = r.bounding_box();
    Grid g;
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < n; ++i) {
            const double tx = n == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(n - 1);
            const double ty = n == 1 ? 0.5 : static_cast<double>(j) / static_cast<double>(n - 1);
            const Point2 p{lo.x + tx * (hi.x - lo.x), lo.y + ty * (hi.y - lo.y)};
            g.points.push_back(p);
            g.inside.push_back(alpha_radius(r, p) <= 1.0 ? 1 : 0);
        }
    return g;
}

inline std::vector<std::size_t> parse_split(const Dataset& d, const std::string& split) {
    if (split == "test") return d.test;
    if (split == "train") return d.train;
    std::vector<std::size_t> all(d.records.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
}

inline std::vector<Point2> read_points_csv(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open " + path.string());
    std::vector<Point2> pts;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        Point2 p;
        if (!(ls >> p.x >> p.y)) {
            if (pts.empty()) continue;  // header
            throw Error("bad point row in " + path.string() + ": " + line);
        }
        pts.push_back(p);
    }
    return pts;
}

inline std::vector<std::pair<std::size_t, double>> parse_levels(const std::vector<std::string>& specs) {
    std::vector<std::pair<std::size_t, double>> out;
    for (const auto& s : specs) {
        const auto colon = s.find(':');
        if (colon == std::string::npos) throw InvalidArgument("level must be n:h, got '" + s + "'");
        out.emplace_back(std::stoul(s.substr(0, colon)), std::stod(s.substr(colon + 1)));
    }
    return out;
}

inline int cli_dispatch(int argc, const char* const* argv, std::ostream& out = std::cout,
                        std::ostream& err = std::cerr) {
    CLI::App app{"variable-domain MIONet toolkit", "vmionet"};
    app.option_defaults()->always_capture_default();
    app.config_formatter(std::make_shared<AutoConfig>());
    app.set_config("--config", "", "TOML or JSON config file; command-line flags override it");
    app.require_subcommand(1, 1);

    Globals g;
    app.add_option("--seed", g.seed, "root seed for all randomness");
    app.add_option("--threads", g.threads, "worker cap (0: VMIONET_THREADS or 1)");

    // ---------------------------------------------------------- gen-regions
    auto* regions = app.add_subcommand("gen-regions", "sample random regions and optionally mesh them");
    std::string rg_out = "regions", rg_family = "smooth";
    std::size_t rg_count = 10;
    double rg_h = 0.0;
    regions->add_option("--out", rg_out, "output directory");
    regions->add_option("--family", rg_family, "smooth | polygon | polygon4 | polygon5 | polygon6");
    regions->add_option("--count", rg_count, "number of regions")->check(CLI::PositiveNumber);
    regions->add_option("--mesh-h", rg_h, "also export a mesh at this size (0: skip)")->check(CLI::NonNegativeNumber);

    // ---------------------------------------------------------- gen-dataset
    auto* gen = app.add_subcommand("gen-dataset", "generate and solve tasks, store disk encodings");
    DatasetConfig dc;
    std::string gd_out = "dataset", gd_family = "smooth", gd_variant = "simple";
    std::size_t gd_fresh = 0;
    gen->add_option("--out", gd_out, "output directory");
    gen->add_option("--tasks", dc.tasks, "number of tasks")->check(CLI::PositiveNumber);
    gen->add_option("--family", gd_family, "smooth | polygon | polygon4 | polygon5 | polygon6");
    gen->add_option("--variant", gd_variant, "simple | full");
    gen->add_option("--points", dc.disk_points, "disk points M")->check(CLI::PositiveNumber);
    gen->add_option("--radii", dc.radii, "region encoding length n_b")->check(CLI::Range(3, 1 << 20));
    gen->add_option("--boundary-values", dc.boundary_values, "boundary encoding length n_g")->check(CLI::Range(3, 1 << 20));
    gen->add_option("--eval-points", dc.eval_points, "evaluation points E")->check(CLI::Range(100, 1 << 24));
    gen->add_option("--mesh-h", dc.h, "mesh size")->check(CLI::PositiveNumber);
    gen->add_option("--point-seed", dc.point_seed, "seed of the disk and evaluation point sets");
    gen->add_option("--test-fraction", dc.test_fraction, "held-out fraction")->check(CLI::Range(0.0, 1.0));
    gen->add_option("--fresh-test", gd_fresh, "also write N freshly generated test tasks to <out>/fresh-test");

    // ---------------------------------------------------------- train
    auto* tr = app.add_subcommand("train", "fit a MIONet to a dataset");
    std::string tr_out = "model", tr_dataset;
    ModelConfig mc;
    TrainConfig tc;
    tr->add_option("--out", tr_out, "output directory");
    tr->add_option("--dataset", tr_dataset, "dataset directory")->required()->check(CLI::ExistingDirectory);
    tr->add_option("--width", mc.width, "hidden width")->check(CLI::PositiveNumber);
    tr->add_option("--depth", mc.hidden_layers, "hidden layers per ReLU network");
    tr->add_option("--rank", mc.rank, "latent size p")->check(CLI::PositiveNumber);
    tr->add_flag("--output-bias", mc.output_bias, "learn a scalar output bias");
    tr->add_option("--lr", tc.lr, "Adam learning rate")->check(CLI::PositiveNumber);
    tr->add_option("--iterations", tc.iterations, "optimizer steps");
    tr->add_option("--batch", tc.batch_size, "tasks per minibatch")->check(CLI::PositiveNumber);
    tr->add_option("--log-interval", tc.log_interval, "loss logging interval");
    tr->add_option("--checkpoint-interval", tc.checkpoint_interval, "checkpoint interval (0: end only)");

    // ---------------------------------------------------------- eval
    auto* ev = app.add_subcommand("eval", "mean L2 and relative L2 errors of a model on a dataset");
    std::string ev_out = ".", ev_model, ev_dataset, ev_split = "test";
    ev->add_option("--out", ev_out, "output directory");
    ev->add_option("--model", ev_model, "checkpoint file")->required()->check(CLI::ExistingFile);
    ev->add_option("--dataset", ev_dataset, "dataset directory")->required()->check(CLI::ExistingDirectory);
    ev->add_option("--split", ev_split, "test | train | all")->check(CLI::IsMember({"test", "train", "all"}));

    // ---------------------------------------------------------- predict
    auto* pr = app.add_subcommand("predict", "predict u at physical points without meshing");
    std::string pr_out = "prediction", pr_model, pr_region, pr_dataset, pr_queries;
    long pr_task = -1;
    double pr_f = 1.0, pr_k = 1.0, pr_g = 0.0;
    std::size_t pr_grid = 41, pr_region_index = 0;
    pr->add_option("--out", pr_out, "output directory");
    pr->add_option("--model", pr_model, "checkpoint file")->required()->check(CLI::ExistingFile);
    pr->add_option("--region", pr_region, "region JSON file (with constant inputs)")->check(CLI::ExistingFile);
    pr->add_option("--region-index", pr_region_index, "entry to use when --region holds an array");
    pr->add_option("--dataset", pr_dataset, "dataset directory whose task to regenerate")->check(CLI::ExistingDirectory);
    pr->add_option("--task", pr_task, "task index within --dataset");
    pr->add_option("--f-const", pr_f, "constant source term for --region");
    pr->add_option("--k-const", pr_k, "constant coefficient for --region (full variant)")->check(CLI::PositiveNumber);
    pr->add_option("--g-const", pr_g, "constant boundary value for --region (full variant)");
    pr->add_option("--queries", pr_queries, "CSV of x,y query points (default: grid inside the region)")->check(CLI::ExistingFile);
    pr->add_option("--grid", pr_grid, "grid size per axis when no queries are given")->check(CLI::PositiveNumber);

    // ---------------------------------------------------------- mesh-influence
    auto* mi = app.add_subcommand("mesh-influence", "predict one task from several boundary/mesh discretizations");
    std::string mi_out = "mesh-influence", mi_model, mi_dataset;
    std::size_t mi_task = 0;
    std::vector<std::string> mi_levels{"100:0.01", "50:0.02", "25:0.04"};
    mi->add_option("--out", mi_out, "output directory");
    mi->add_option("--model", mi_model, "checkpoint file")->required()->check(CLI::ExistingFile);
    mi->add_option("--dataset", mi_dataset, "dataset directory")->required()->check(CLI::ExistingDirectory);
    mi->add_option("--task", mi_task, "task index");
    mi->add_option("--levels", mi_levels, "boundary points:mesh size pairs")->delimiter(',');

    // ---------------------------------------------------------- bench-projection
    auto* bp = app.add_subcommand("bench-projection", "mean d_U between regions and their n-point projections");
    std::string bp_out = "bench-projection", bp_family = "smooth";
    std::vector<std::size_t> bp_n{8, 16, 32, 64, 128, 256};
    std::size_t bp_regions = 20;
    bp->add_option("--out", bp_out, "output directory");
    bp->add_option("--n", bp_n, "boundary point counts")->delimiter(',')->check(CLI::Range(3, 1 << 20));
    bp->add_option("--regions", bp_regions, "regions to average over")->check(CLI::PositiveNumber);
    bp->add_option("--family", bp_family, "smooth | polygon | polygon4 | polygon5 | polygon6");

    // ---------------------------------------------------------- export-field
    auto* ex = app.add_subcommand("export-field", "predicted or FEM field on a grid, NaN outside the region");
    std::string ex_out = "field", ex_model, ex_dataset, ex_which = "predicted";
    std::size_t ex_task = 0, ex_grid = 101;
    ex->add_option("--out", ex_out, "output directory");
    ex->add_option("--model", ex_model, "checkpoint file (needed for predicted)")->check(CLI::ExistingFile);
    ex->add_option("--dataset", ex_dataset, "dataset directory")->required()->check(CLI::ExistingDirectory);
    ex->add_option("--task", ex_task, "task index");
    ex->add_option("--field", ex_which, "predicted | true")->check(CLI::IsMember({"predicted", "true"}));
    ex->add_option("--grid", ex_grid, "grid points per axis")->check(CLI::Range(2, 10000));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*regions) {
            const auto family = parse_family(rg_family);
            json arr = json::array();
            for (std::size_t i = 0; i < rg_count; ++i) {
                const Region r = region_for_index(family, g.seed, i);
                arr.push_back(region_to_json(r));
                if (rg_h > 0.0) export_mesh(mesh_region(r, rg_h), fs::path(rg_out) / "meshes", "region-" + std::to_string(i));
            }
            fs::create_directories(rg_out);
            write_text(fs::path(rg_out) / "regions.json", arr.dump(1) + "\n");
            write_resolved(rg_out, app, *regions, g, {{"family", to_string(family)}, {"count", rg_count}});
            out << "wrote " << rg_count << " regions to " << rg_out << "\n";
        } else if (*gen) {
            dc.family = parse_family(gd_family);
            dc.variant = variant_from_string(gd_variant);
            dc.seed = g.seed;
            dc.threads = g.threads;
            if (gd_fresh > 0) dc.test_fraction = 0.0;
            const Dataset d = build_dataset(dc);
            write_dataset(d, gd_out);
            json resolved{{"dataset", to_json(dc)}};
            if (gd_fresh > 0) {
                const DatasetConfig fc = fresh_test_config(dc, gd_fresh);
                write_dataset(build_dataset(fc), fs::path(gd_out) / "fresh-test");
                resolved["fresh_test"] = to_json(fc);
            }
            write_resolved(gd_out, app, *gen, g, resolved);
            out << "wrote " << d.records.size() << " tasks (" << d.train.size() << " train, " << d.test.size()
                << " test) to " << gd_out << "\n";
        } else if (*tr) {
            const Dataset d = read_dataset(tr_dataset);
            mc.seed = derive_seed(g.seed, 0, "init");
            tc.seed = derive_seed(g.seed, 0, "batch");
            ModelBundle b = make_bundle(d, mc);
            const TrainingSet ts = training_set(d, d.train, b.output_scale);
            const fs::path dir(tr_out);
            fs::create_directories(dir);
            tc.on_checkpoint = [&](const MIONetModel&, std::size_t it, double loss) {
                save_bundle(dir / "model.ckpt", b, {g.seed, it, loss, {}});
            };
            const TrainResult res = train(b.model, ts, tc);
            save_bundle(dir / "model.ckpt", b, {g.seed, res.iterations, res.final_loss, {}});
            std::ofstream csv(dir / "loss.csv");
            csv << "iteration,loss\n";
            for (const auto& h : res.history) csv << h.iteration << "," << fmt(h.loss) << "\n";
            write_resolved(dir, app, *tr, g,
                           {{"model_spec", to_json(b.model.spec())},
                            {"parameters", b.model.parameter_count()},
                            {"lr", tc.lr},
                            {"iterations", tc.iterations},
                            {"batch_size", tc.batch_size},
                            {"init_seed", mc.seed},
                            {"batch_seed", tc.seed}});
            out << "trained " << res.iterations << " iterations, final batch loss " << fmt(res.final_loss) << "\n";
        } else if (*ev) {
            const ModelBundle b = load_bundle(ev_model);
            const Dataset d = read_dataset(ev_dataset);
            const auto idx = parse_split(d, ev_split);
            const ErrorSummary s = evaluate_errors(b, d, idx, d.eval_points.size());
            json r{{"split", ev_split},
                   {"tasks", s.tasks},
                   {"skipped", s.skipped},
                   {"mean_l2", s.mean_l2},
                   {"mean_relative_l2", s.mean_relative_l2}};
            fs::create_directories(ev_out);
            write_text(fs::path(ev_out) / "errors.json", r.dump(2) + "\n");
            write_resolved(ev_out, app, *ev, g, r);
            out << "mean_l2 " << fmt(s.mean_l2) << "\n"
                << "mean_relative_l2 " << fmt(s.mean_relative_l2) << "\n";
        } else if (*pr) {
            const ModelBundle b = load_bundle(pr_model);
            std::optional<Task> task;
            std::optional<Region> region;
            if (!pr_dataset.empty()) {
                if (pr_task < 0) throw InvalidArgument("--dataset needs --task");
                const Dataset d = read_dataset(pr_dataset);
                if (static_cast<std::size_t>(pr_task) >= d.config.tasks) throw InvalidArgument("task index out of range");
                task = generate_task(d.config, static_cast<std::size_t>(pr_task)).task;
                region = task->region;
            } else if (!pr_region.empty()) {
                const json rj = json::parse(read_text(pr_region));
                if (rj.is_array() && pr_region_index >= rj.size()) throw InvalidArgument("region index out of range");
                region = region_from_json(rj.is_array() ? rj[pr_region_index] : rj);
            } else {
                throw InvalidArgument("predict needs --region or --dataset with --task");
            }
            std::vector<Point2> q;
            if (!pr_queries.empty()) {
                q = read_points_csv(pr_queries);
            } else {
                const Grid gr = region_grid(*region, pr_grid);
                for (std::size_t i = 0; i < gr.points.size(); ++i)
                    if (gr.inside[i]) q.push_back(gr.points[i]);
            }
            std::vector<double> pred, truth;
            if (task) {
                const double tol = pullback_tolerance(task->mesh);
                const PlaneField f = field_function(task->mesh, task->f, tol);
                if (b.variant == Variant::Simple) {
                    pred = predict_solution(b, *region, f, q);
                } else {
                    pred = predict_full(b, *region, field_function(task->mesh, task->k, tol), f, task->g_of_angle, q);
                }
                const PointLocator loc(task->mesh);
                for (auto p : q) truth.push_back(loc.evaluate(task->u.values, p, tol));
            } else {
                const PlaneField f = [pr_f](Point2) { return pr_f; };
                if (b.variant == Variant::Simple) {
                    pred = predict_solution(b, *region, f, q);
                } else {
                    pred = predict_full(b, *region, [pr_k](Point2) { return pr_k; }, f,
                                        [pr_g](double) { return pr_g; }, q);
                }
            }
            fs::create_directories(pr_out);
            std::ofstream csv(fs::path(pr_out) / "prediction.csv");
            csv << (truth.empty() ? "x,y,prediction\n" : "x,y,prediction,truth\n");
            for (std::size_t i = 0; i < q.size(); ++i) {
                csv << fmt(q[i].x) << "," << fmt(q[i].y) << "," << fmt(pred[i]);
                if (!truth.empty()) csv << "," << fmt(truth[i]);
                csv << "\n";
            }
            write_resolved(pr_out, app, *pr, g, {{"region", region_to_json(*region)}, {"queries", q.size()}});
            out << "predicted " << q.size() << " points\n";
        } else if (*mi) {
            const ModelBundle b = load_bundle(mi_model);
            const Dataset d = read_dataset(mi_dataset);
            check_compatible(b, d);
            if (mi_task >= d.config.tasks) throw InvalidArgument("task index out of range");
            const Task task = generate_task(d.config, mi_task).task;
            std::vector<DiscretizationLevel> levels;
            for (auto [n, h] : parse_levels(mi_levels)) levels.push_back({n, h});
            const auto res = mesh_influence_experiment(b, task, d.eval_points, levels);
            json rows = json::array();
            out << "boundary_points mesh_h nodes l2 relative_l2\n";
            for (const auto& lr : res.levels) {
                rows.push_back({{"boundary_points", lr.level.boundary_points},
                                {"mesh_h", lr.level.h},
                                {"nodes", lr.nodes},
                                {"l2", lr.l2},
                                {"relative_l2", lr.relative_l2}});
                out << lr.level.boundary_points << " " << lr.level.h << " " << lr.nodes << " " << lr.l2 << " "
                    << lr.relative_l2 << "\n";
            }
            const json r{{"task", mi_task}, {"levels", rows}, {"pairwise_relative_l2", res.pairwise},
                         {"max_pairwise_relative_l2", res.max_pairwise()}};
            fs::create_directories(mi_out);
            write_text(fs::path(mi_out) / "mesh-influence.json", r.dump(2) + "\n");
            write_resolved(mi_out, app, *mi, g, r);
            out << "max pairwise relative difference " << res.max_pairwise() << "\n";
        } else if (*bp) {
            const auto family = parse_family(bp_family);
            std::vector<Region> rs;
            for (std::size_t i = 0; i < bp_regions; ++i) rs.push_back(region_for_index(family, g.seed, i));
            const RegionMetric metric;
            fs::create_directories(bp_out);
            std::ofstream csv(fs::path(bp_out) / "projection.csv");
            csv << "n,mean_dU\n";
            out << "n mean_dU\n";
            json rows = json::array();
            for (auto n : bp_n) {
                double s = 0.0;
                for (const auto& r : rs) s += metric_dU(r, project(r, n), metric);
                s /= static_cast<double>(rs.size());
                csv << n << "," << fmt(s) << "\n";
                out << n << " " << s << "\n";
                rows.push_back({{"n", n}, {"mean_dU", s}});
            }
            write_resolved(bp_out, app, *bp, g, {{"family", to_string(family)}, {"rows", rows}});
        } else if (*ex) {
            const Dataset d = read_dataset(ex_dataset);
            if (ex_task >= d.config.tasks) throw InvalidArgument("task index out of range");
            const Task task = generate_task(d.config, ex_task).task;
            const Grid gr = region_grid(task.region, ex_grid);
            std::vector<Point2> inside;
            for (std::size_t i = 0; i < gr.points.size(); ++i)
                if (gr.inside[i]) inside.push_back(gr.points[i]);
            std::vector<double> vals;
            const double tol = pullback_tolerance(task.mesh);
            if (ex_which == "predicted") {
                if (ex_model.empty()) throw InvalidArgument("--field predicted needs --model");
                const ModelBundle b = load_bundle(ex_model);
                check_compatible(b, d);
                const PlaneField f = field_function(task.mesh, task.f, tol);
                vals = b.variant == Variant::Simple
                           ? predict_solution(b, task.region, f, inside)
                           : predict_full(b, task.region, field_function(task.mesh, task.k, tol), f,
                                          task.g_of_angle, inside);
            } else {
                const PointLocator loc(task.mesh);
                for (auto p : inside) vals.push_back(loc.evaluate(task.u.values, p, tol));
            }
            fs::create_directories(ex_out);
            std::ofstream csv(fs::path(ex_out) / "field.csv");
            csv << "x,y,value\n";
            std::size_t k = 0;
            for (std::size_t i = 0; i < gr.points.size(); ++i) {
                csv << fmt(gr.points[i].x) << "," << fmt(gr.points[i].y) << ",";
                if (gr.inside[i]) csv << fmt(vals[k++]);
                else csv << "NaN";
                csv << "\n";
            }
            write_resolved(ex_out, app, *ex, g,
                           {{"field", ex_which}, {"grid", ex_grid}, {"inside", inside.size()},
                            {"region", region_to_json(task.region)}});
            out << "wrote " << gr.points.size() << " grid points (" << inside.size() << " inside)\n";
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

}  // namespace vmionet::cli
