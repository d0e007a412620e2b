#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vmionet/cli.hpp"

using namespace vmionet;
namespace fs = std::filesystem;

namespace {

struct CliRun {
    int code;
    std::string out;
    std::string err;
};

CliRun run(std::vector<std::string> args) {
    args.insert(args.begin(), "vmionet");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::cli_dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path temp_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("vmionet-cli-" + name);
    fs::remove_all(p);
    return p;
}

std::string file_bytes(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::ifstream is(p);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(is, line)) {
        std::vector<std::string> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(cell);
        rows.push_back(row);
    }
    return rows;
}

// One small dataset and model shared by several tests.
struct Fixture {
    fs::path root = temp_dir("fixture");
    fs::path dataset = root / "data";
    fs::path model = root / "model";

    Fixture() {
        EXPECT_EQ(run({"--seed", "3", "gen-dataset", "--out", dataset.string(), "--tasks", "6", "--points", "40",
                       "--eval-points", "150", "--test-fraction", "0.34"}).code, 0);
        EXPECT_EQ(run({"--seed", "4", "train", "--dataset", dataset.string(), "--out", model.string(), "--width", "12",
                       "--depth", "1", "--rank", "6", "--iterations", "200", "--batch", "2"}).code, 0);
    }
};

const Fixture& fixture() {
    static const Fixture f;
    return f;
}

}  // namespace

TEST(Cli, UsageErrorsExitWithOne) {
    EXPECT_EQ(run({}).code, 1);
    EXPECT_EQ(run({"frobnicate"}).code, 1);
    EXPECT_EQ(run({"gen-dataset", "--bogus", "1"}).code, 1);
    EXPECT_EQ(run({"train"}).code, 1);  // --dataset is required
    EXPECT_EQ(run({"gen-dataset", "--tasks", "0"}).code, 1);
    EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, BenchProjectionIsMonotone) {
    const auto dir = temp_dir("bench");
    const CliRun r = run({"--seed", "1", "bench-projection", "--n", "8,16,32,64", "--regions", "20", "--out", dir.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = read_csv(dir / "projection.csv");
    ASSERT_EQ(rows.size(), 5u);
    EXPECT_EQ(rows[0][0], "n");
    for (std::size_t i = 2; i < rows.size(); ++i) EXPECT_LT(std::stod(rows[i][1]), std::stod(rows[i - 1][1]));
    EXPECT_TRUE(fs::exists(dir / "resolved-config.json"));
}

TEST(Cli, GenDatasetShapeContract) {
    const auto dir = temp_dir("gen");
    const CliRun r = run({"gen-dataset", "--tasks", "4", "--family", "smooth", "--points", "50", "--out", dir.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const json m = json::parse(read_text(dir / "manifest.json"));
    EXPECT_EQ(m.at("record_count").get<std::size_t>(), 4u);
    EXPECT_EQ(fs::file_size(dir / "records.bin"), 4 * m.at("record_length").get<std::size_t>() * sizeof(double));
    EXPECT_EQ(m.at("disk_points").size(), 50u);
    const json rc = json::parse(read_text(dir / "resolved-config.json"));
    EXPECT_EQ(rc.at("command"), "gen-dataset");
    EXPECT_EQ(rc.at("resolved").at("dataset").at("disk_points"), 50);
}

TEST(Cli, EvalMatchesLibraryBitForBit) {
    const auto& fx = fixture();
    const auto out = temp_dir("eval");
    const CliRun r = run({"eval", "--model", (fx.model / "model.ckpt").string(), "--dataset", fx.dataset.string(),
                       "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const Dataset d = read_dataset(fx.dataset);
    const ModelBundle b = load_bundle(fx.model / "model.ckpt");
    const ErrorSummary s = evaluate_errors(b, d, d.test, d.eval_points.size());
    EXPECT_EQ(r.out, "mean_l2 " + cli::fmt(s.mean_l2) + "\nmean_relative_l2 " + cli::fmt(s.mean_relative_l2) + "\n");
    const json j = json::parse(read_text(out / "errors.json"));
    EXPECT_EQ(j.at("mean_l2").get<double>(), s.mean_l2);
}

TEST(Cli, TrainingIsReproducible) {
    const auto& fx = fixture();
    const auto again = temp_dir("train-again");
    ASSERT_EQ(run({"--seed", "4", "train", "--dataset", fx.dataset.string(), "--out", again.string(), "--width", "12",
                   "--depth", "1", "--rank", "6", "--iterations", "200", "--batch", "2"}).code, 0);
    EXPECT_EQ(file_bytes(fx.model / "model.ckpt"), file_bytes(again / "model.ckpt"));
    EXPECT_EQ(file_bytes(fx.model / "loss.csv"), file_bytes(again / "loss.csv"));
    EXPECT_EQ(read_csv(again / "loss.csv").size(), 3u);
}

TEST(Cli, RuntimeFailureExitsWithTwo) {
    const auto& fx = fixture();
    const auto other = temp_dir("other-data");
    ASSERT_EQ(run({"gen-dataset", "--out", other.string(), "--tasks", "1", "--points", "40", "--eval-points", "150",
                   "--point-seed", "77"}).code, 0);
    const CliRun r = run({"eval", "--model", (fx.model / "model.ckpt").string(), "--dataset", other.string(), "--out",
                       temp_dir("eval-bad").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("disk point"), std::string::npos);
}

TEST(Cli, ExportFieldCountsInsidePoints) {
    const auto& fx = fixture();
    for (const std::string which : {"true", "predicted"}) {
        const auto dir = temp_dir("export-" + which);
        const CliRun r = run({"export-field", "--dataset", fx.dataset.string(), "--model", (fx.model / "model.ckpt").string(),
                           "--task", "1", "--field", which, "--grid", "31", "--out", dir.string()});
        ASSERT_EQ(r.code, 0) << r.err;
        const auto rows = read_csv(dir / "field.csv");
        ASSERT_EQ(rows.size(), 31u * 31u + 1);
        EXPECT_EQ(rows[0], (std::vector<std::string>{"x", "y", "value"}));
        const Dataset d = read_dataset(fx.dataset);
        const Region reg = generate_task(d.config, 1).task.region;
        std::size_t expect = 0, finite = 0;
        for (std::size_t i = 1; i < rows.size(); ++i) {
            const Point2 p{std::stod(rows[i][0]), std::stod(rows[i][1])};
            const Point2 v = p - reg.centroid();
            if (norm(v) == 0.0 || norm(v) / reg.boundary_radius(angle_of(v)) <= 1.0) ++expect;
            if (rows[i][2] != "NaN") ++finite;
        }
        EXPECT_EQ(finite, expect);
        EXPECT_GT(finite, 100u);
    }
}

TEST(Cli, PredictFromRegionFile) {
    const auto& fx = fixture();
    const auto dir = temp_dir("predict");
    fs::create_directories(dir);
    write_text(dir / "region.json", region_to_json(random_convex_polygon(5, 2)).dump());
    auto predict = [&](const std::string& f, const std::string& out) {
        return run({"predict", "--model", (fx.model / "model.ckpt").string(), "--region", (dir / "region.json").string(),
                    "--f-const", f, "--grid", "9", "--out", (dir / out).string()});
    };
    ASSERT_EQ(predict("1", "one").code, 0);
    ASSERT_EQ(predict("2", "two").code, 0);
    const auto a = read_csv(dir / "one" / "prediction.csv"), b = read_csv(dir / "two" / "prediction.csv");
    ASSERT_EQ(a.size(), b.size());
    ASSERT_GT(a.size(), 10u);
    for (std::size_t i = 1; i < a.size(); ++i) EXPECT_NEAR(std::stod(b[i][2]), 2 * std::stod(a[i][2]), 1e-12 + 1e-12 * std::abs(std::stod(a[i][2])));
    const CliRun withtask = run({"predict", "--model", (fx.model / "model.ckpt").string(), "--dataset", fx.dataset.string(),
                              "--task", "0", "--grid", "7", "--out", (dir / "task").string()});
    ASSERT_EQ(withtask.code, 0) << withtask.err;
    EXPECT_EQ(read_csv(dir / "task" / "prediction.csv")[0].size(), 4u);
}

TEST(Cli, MeshInfluenceWritesTable) {
    const auto& fx = fixture();
    const auto dir = temp_dir("mi");
    const CliRun r = run({"mesh-influence", "--model", (fx.model / "model.ckpt").string(), "--dataset", fx.dataset.string(),
                       "--task", "0", "--levels", "40:0.04,20:0.06", "--out", dir.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const json j = json::parse(read_text(dir / "mesh-influence.json"));
    EXPECT_EQ(j.at("levels").size(), 2u);
    EXPECT_EQ(j.at("pairwise_relative_l2").size(), 2u);
}

TEST(Cli, GenRegionsWithMeshes) {
    const auto dir = temp_dir("regions");
    ASSERT_EQ(run({"gen-regions", "--family", "polygon", "--count", "3", "--mesh-h", "0.05", "--out", dir.string()}).code, 0);
    const json j = json::parse(read_text(dir / "regions.json"));
    ASSERT_EQ(j.size(), 3u);
    EXPECT_EQ(j[1].at("vertices").size(), 5u);
    EXPECT_TRUE(fs::exists(dir / "meshes" / "region-2.nodes.f64"));
}

TEST(Cli, ConfigFilesJsonAndToml) {
    const auto dir = temp_dir("config");
    fs::create_directories(dir);
    write_text(dir / "c.json", R"({"seed": 11, "gen-dataset": {"tasks": 2, "points": 30, "eval-points": 120}})");
    write_text(dir / "c.toml", "seed = 11\n[gen-dataset]\ntasks = 2\npoints = 30\neval-points = 120\n");
    ASSERT_EQ(run({"--config", (dir / "c.json").string(), "gen-dataset", "--out", (dir / "a").string()}).code, 0);
    ASSERT_EQ(run({"--config", (dir / "c.toml").string(), "gen-dataset", "--out", (dir / "b").string()}).code, 0);
    const json m = json::parse(read_text(dir / "a" / "manifest.json"));
    EXPECT_EQ(m.at("config").at("seed"), 11);
    EXPECT_EQ(m.at("record_count"), 2);
    EXPECT_EQ(m.at("disk_points").size(), 30u);
    EXPECT_EQ(file_bytes(dir / "a" / "records.bin"), file_bytes(dir / "b" / "records.bin"));
    // Command-line flags override the file.
    ASSERT_EQ(run({"--config", (dir / "c.json").string(), "gen-dataset", "--tasks", "1", "--out", (dir / "c").string()}).code, 0);
    EXPECT_EQ(json::parse(read_text(dir / "c" / "manifest.json")).at("record_count"), 1);
}

TEST(Cli, FreshTestCompanion) {
    const auto dir = temp_dir("fresh");
    ASSERT_EQ(run({"gen-dataset", "--tasks", "3", "--points", "20", "--eval-points", "100", "--fresh-test", "2",
                   "--out", dir.string()}).code, 0);
    const Dataset d = read_dataset(dir), f = read_dataset(dir / "fresh-test");
    EXPECT_EQ(d.test.size(), 0u);
    EXPECT_EQ(f.test.size(), 2u);
    EXPECT_EQ(d.disk_points, f.disk_points);
}
