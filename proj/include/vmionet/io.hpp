#pragma once

// On-disk formats: region JSON, mesh export, model checkpoints, and raw
// little-endian float64 blobs.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "vmionet/error.hpp"
#include "vmionet/geometry.hpp"
#include "vmionet/mesh.hpp"
#include "vmionet/mionet.hpp"

namespace vmionet {

using json = nlohmann::json;

inline constexpr char kCheckpointMagic[8] = {'V', 'M', 'I', 'O', 'N', 'E', 'T', '1'};

namespace detail {

template <class T>
T to_little(T v) {
    if constexpr (std::endian::native == std::endian::little) {
        return v;
    } else {
        unsigned char b[sizeof(T)];
        std::memcpy(b, &v, sizeof(T));
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
        std::memcpy(&v, b, sizeof(T));
        return v;
    }
}

}  // namespace detail

template <class T>
void write_le(std::ostream& os, std::span<const T> values) {
    static_assert(std::is_arithmetic_v<T>);
    if constexpr (std::endian::native == std::endian::little) {
        os.write(reinterpret_cast<const char*>(values.data()),
                 static_cast<std::streamsize>(values.size_bytes()));
    } else {
        for (T v : values) {
            const T le = detail::to_little(v);
            os.write(reinterpret_cast<const char*>(&le), sizeof(T));
        }
    }
    if (!os) throw Error("write failed");
}

template <class T>
std::vector<T> read_le(std::istream& is, std::size_t count) {
    std::vector<T> out(count);
    is.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(count * sizeof(T)));
    if (static_cast<std::size_t>(is.gcount()) != count * sizeof(T)) throw Error("unexpected end of file");
    if constexpr (std::endian::native != std::endian::little)
        for (auto& v : out) v = detail::to_little(v);
    return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open " + path.string() + " for writing");
    os << text;
    if (!os) throw Error("write failed: " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

// ---------------------------------------------------------------- regions

inline json region_to_json(const Region& r) {
    json j;
    j["lipschitz_bound"] = r.lipschitz_bound();
    if (r.kind() == RegionKind::Polygon) {
        j["kind"] = "polygon";
        json v = json::array();
        for (auto p : r.vertices()) v.push_back({p.x, p.y});
        j["vertices"] = v;
    } else {
        j["kind"] = "sampled_boundary";
        j["pole"] = {r.pole().x, r.pole().y};
        j["radii"] = std::vector<double>(r.radii().begin(), r.radii().end());
    }
    return j;
}

inline Region region_from_json(const json& j) {
    const double lip = j.value("lipschitz_bound", kDefaultLipschitzBound);
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "polygon") {
        std::vector<Point2> v;
        for (const auto& p : j.at("vertices")) v.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        return Region::polygon(std::move(v), lip);
    }
    if (kind == "sampled_boundary") {
        Point2 pole{};
        if (j.contains("pole")) pole = {j["pole"].at(0).get<double>(), j["pole"].at(1).get<double>()};
        return Region::sampled(pole, j.at("radii").get<std::vector<double>>(), lip);
    }
    throw InvalidArgument("unknown region kind '" + kind + "'");
}

// ------------------------------------------------------------------ meshes

/// Writes <stem>.json, <stem>.nodes.f64 (x,y row-major) and
/// <stem>.triangles.u32 (3 indices per row).
inline void export_mesh(const TriMesh& m, const std::filesystem::path& dir, const std::string& stem) {
    std::filesystem::create_directories(dir);
    std::vector<double> xy;
    xy.reserve(m.nodes.size() * 2);
    for (auto p : m.nodes) {
        xy.push_back(p.x);
        xy.push_back(p.y);
    }
    std::vector<std::uint32_t> tri;
    tri.reserve(m.triangles.size() * 3);
    for (const auto& t : m.triangles) tri.insert(tri.end(), t.begin(), t.end());
    {
        std::ofstream os(dir / (stem + ".nodes.f64"), std::ios::binary);
        write_le<double>(os, xy);
    }
    {
        std::ofstream os(dir / (stem + ".triangles.u32"), std::ios::binary);
        write_le<std::uint32_t>(os, tri);
    }
    json j;
    j["node_count"] = m.nodes.size();
    j["triangle_count"] = m.triangles.size();
    j["h"] = m.h;
    j["nodes_file"] = stem + ".nodes.f64";
    j["triangles_file"] = stem + ".triangles.u32";
    j["boundary_nodes"] = m.boundary_nodes;
    j["region"] = region_to_json(m.region);
    j["byte_order"] = "little";
    write_text(dir / (stem + ".json"), j.dump(2));
}

// ------------------------------------------------------------ checkpoints

inline json to_json(const MLPSpec& s) {
    return {{"layer_sizes", s.layer_sizes},
            {"activation", s.activation == Activation::ReLU ? "relu" : "identity"},
            {"bias", s.bias},
            {"linear_only", s.linear_only}};
}

inline MLPSpec mlp_from_json(const json& j) {
    MLPSpec s;
    s.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
    s.activation = j.at("activation").get<std::string>() == "relu" ? Activation::ReLU : Activation::Identity;
    s.bias = j.at("bias").get<bool>();
    s.linear_only = j.at("linear_only").get<bool>();
    return s;
}

inline json to_json(const MIONetSpec& s) {
    json b = json::array();
    for (const auto& m : s.branches) b.push_back(to_json(m));
    return {{"branches", b}, {"trunk", to_json(s.trunk)}, {"output_bias", s.output_bias}};
}

inline MIONetSpec spec_from_json(const json& j) {
    MIONetSpec s;
    for (const auto& b : j.at("branches")) s.branches.push_back(mlp_from_json(b));
    s.trunk = mlp_from_json(j.at("trunk"));
    s.output_bias = j.at("output_bias").get<bool>();
    return s;
}

struct CheckpointInfo {
    std::uint64_t seed = 0;
    std::size_t iteration = 0;
    double loss = 0.0;
    json metadata = json::object();
};

struct Checkpoint {
    MIONetModel model;
    CheckpointInfo info;
};

/// Layout: 8-byte magic "VMIONET1", uint64 LE header length, JSON header,
/// then parameter_count float64 LE values.
inline void save_checkpoint(const std::filesystem::path& path, const MIONetModel& model,
                            const CheckpointInfo& info) {
    json header;
    header["spec"] = to_json(model.spec());
    json layout = json::array();
    for (const auto& s : model.layout())
        layout.push_back({{"name", s.name}, {"offset", s.offset}, {"rows", s.rows}, {"cols", s.cols}});
    header["layout"] = layout;
    header["parameter_count"] = model.parameter_count();
    header["seed"] = info.seed;
    header["iteration"] = info.iteration;
    header["loss"] = info.loss;
    header["metadata"] = info.metadata;
    const std::string text = header.dump();

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open " + path.string() + " for writing");
    os.write(kCheckpointMagic, sizeof kCheckpointMagic);
    const std::uint64_t len = text.size();
    write_le<std::uint64_t>(os, std::span<const std::uint64_t>(&len, 1));
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    const auto& p = model.parameters();
    write_le<double>(os, std::span<const double>(p.data(), static_cast<std::size_t>(p.size())));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open checkpoint " + path.string());
    char magic[8];
    is.read(magic, 8);
    if (is.gcount() != 8 || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw Error("not a VMIONET1 checkpoint: " + path.string());
    const auto len = read_le<std::uint64_t>(is, 1)[0];
    std::string text(len, '\0');
    is.read(text.data(), static_cast<std::streamsize>(len));
    if (static_cast<std::uint64_t>(is.gcount()) != len) throw Error("truncated checkpoint header");
    const json header = json::parse(text);

    Checkpoint ck{MIONetModel(spec_from_json(header.at("spec")), header.at("seed").get<std::uint64_t>()),
                  {}};
    ck.info.seed = header.at("seed").get<std::uint64_t>();
    ck.info.iteration = header.at("iteration").get<std::size_t>();
    ck.info.loss = header.at("loss").get<double>();
    ck.info.metadata = header.value("metadata", json::object());
    const auto count = header.at("parameter_count").get<std::size_t>();
    if (count != ck.model.parameter_count()) throw Error("checkpoint parameter count mismatch");
    const auto& layout = header.at("layout");
    if (layout.size() != ck.model.layout().size()) throw Error("checkpoint layout mismatch");
    for (std::size_t i = 0; i < layout.size(); ++i)
        if (layout[i].at("offset").get<std::size_t>() != ck.model.layout()[i].offset ||
            layout[i].at("name").get<std::string>() != ck.model.layout()[i].name)
            throw Error("checkpoint layout mismatch at slot " + std::to_string(i));
    const auto values = read_le<double>(is, count);
    ck.model.set_parameters(Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(count)));
    return ck;
}

}  // namespace vmionet
