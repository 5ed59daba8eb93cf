#pragma once

#include <memory>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "posebench/io.hpp"
#include "posebench/mesh.hpp"
#include "posebench/noise.hpp"

namespace posebench {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// One mesh class available to the scene generator.
struct MeshSpec {
    std::string name;
    std::string kind = "box";  // box | cylinder | l_bracket | capped_can | square | ply
    bool symmetric = false;
    bool mask_pe_exempt = false;  // skip masking of the position encoding
    Vec3 size = Vec3(0.1, 0.08, 0.05);
    double radius = 0.035;
    double height = 0.11;
    int subdiv = 4;
    int segments = 36;
    std::string path;  // for kind == "ply"
};

struct AblationCell {
    bool box = false;
    bool mask = false;
    bool depth = false;

    std::string tag() const {
        std::string t;
        if (box) t += "box";
        if (mask) t += (t.empty() ? "" : "+") + std::string("mask");
        if (depth) t += (t.empty() ? "" : "+") + std::string("depth");
        return t.empty() ? "none" : t;
    }
    auto operator<=>(const AblationCell&) const = default;
};

struct ExperimentConfig {
    std::uint64_t seed = 20240817;
    int scene_count = 60;
    CameraIntrinsics camera{320, 320, 80, 60, 160, 120};
    std::vector<MeshSpec> meshes;
    NoiseSpec noise{0.06, 1, 0.005, 0.002, 3, 7};
    std::vector<AblationCell> ablation_cells;
    double train_fraction = 0.5;
    std::string output_dir = "out";

    // scene generation knobs
    int min_instances = 2;
    int max_instances = 3;
    double plane_depth = 1.7;
    double min_depth = 0.75;  // instance placement range, meters
    double max_depth = 1.1;

    // pipeline knobs
    double crop_margin = 0.3;
    int subsample = 5000;
    bool degrade_annotations = false;
    double abc_noise_sigma = 0.008;  // error of the object-coordinate oracle
    int histogram_bins = 50;
    int workers = 1;
};

inline ExperimentConfig default_config() {
    ExperimentConfig cfg;
    cfg.meshes = {
        {"crate", "box", false, false, Vec3(0.050, 0.038, 0.025), 0, 0, 5, 0, ""},
        {"tin", "cylinder", true, false, Vec3::Zero(), 0.0147, 0.046, 0, 40, ""},
        {"bracket", "l_bracket", false, false, Vec3(0.042, 0.017, 0.0105), 0, 0, 3, 0, ""},
        {"can", "capped_can", true, false, Vec3::Zero(), 0.0126, 0.029, 0, 32, ""},
    };
    cfg.ablation_cells = {
        {false, false, false}, {true, false, false}, {true, true, false}, {true, true, true}};
    return cfg;
}

inline std::shared_ptr<const Mesh> build_mesh(const MeshSpec& spec) {
    Mesh m;
    if (spec.kind == "box") {
        m = make_box(spec.name, spec.size, spec.subdiv);
    } else if (spec.kind == "cylinder") {
        m = make_cylinder(spec.name, spec.radius, spec.height, spec.segments);
    } else if (spec.kind == "l_bracket") {
        m = make_l_bracket(spec.name, spec.size.x(), spec.size.y(), spec.size.z(), spec.subdiv);
    } else if (spec.kind == "capped_can") {
        m = make_capped_can(spec.name, spec.radius, spec.height, spec.segments);
    } else if (spec.kind == "square") {
        m = make_square_plate(spec.name, spec.size.x());
    } else if (spec.kind == "ply") {
        m = load_ply(spec.path, spec.name, spec.symmetric);
    } else {
        throw ConfigError("meshes: unknown kind '" + spec.kind + "'");
    }
    m.symmetric = spec.symmetric;
    validate_mesh(m);
    return std::make_shared<const Mesh>(std::move(m));
}

inline int train_scene_count(const ExperimentConfig& cfg) {
    return int(std::lround(cfg.train_fraction * cfg.scene_count));
}

inline void validate_config(const ExperimentConfig& cfg) {
    std::vector<std::string> problems;
    if (cfg.scene_count < 1) problems.push_back("scene_count: must be >= 1");
    if (!cfg.camera.is_valid()) problems.push_back("camera: invalid intrinsics");
    if (cfg.meshes.empty()) problems.push_back("meshes: at least one mesh class required");
    std::set<std::string> names;
    for (const auto& m : cfg.meshes)
        if (!names.insert(m.name).second)
            problems.push_back("meshes: duplicate class name '" + m.name + "'");
    if (!cfg.noise.is_valid()) problems.push_back("noise: magnitudes out of range");
    if (cfg.ablation_cells.empty()) problems.push_back("ablation_cells: must be nonempty");
    std::set<AblationCell> cells(cfg.ablation_cells.begin(), cfg.ablation_cells.end());
    if (cells.size() != cfg.ablation_cells.size())
        problems.push_back("ablation_cells: cells must be distinct");
    if (cfg.train_fraction < 0 || cfg.train_fraction > 1)
        problems.push_back("train_fraction: must be within [0,1]");
    else if (train_scene_count(cfg) >= cfg.scene_count && cfg.scene_count >= 1)
        problems.push_back("train_fraction: must leave at least one test scene");
    if (cfg.min_instances < 1 || cfg.max_instances < cfg.min_instances)
        problems.push_back("instances: need 1 <= min_instances <= max_instances");
    if (cfg.plane_depth <= 0 || cfg.min_depth <= 0 || cfg.max_depth < cfg.min_depth ||
        cfg.max_depth >= cfg.plane_depth)
        problems.push_back("depths: need 0 < min_depth <= max_depth < plane_depth");
    if (cfg.crop_margin < 0) problems.push_back("crop_margin: must be >= 0");
    if (cfg.subsample < 3) problems.push_back("subsample: must be >= 3");
    if (cfg.abc_noise_sigma < 0) problems.push_back("abc_noise_sigma: must be >= 0");
    if (cfg.histogram_bins < 1) problems.push_back("histogram_bins: must be >= 1");
    if (cfg.workers < 1) problems.push_back("workers: must be >= 1");
    if (!problems.empty()) {
        std::string msg = "invalid config:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw ConfigError(msg);
    }
}

namespace detail {

template <typename T>
T field_or(const json& j, const std::string& key, const T& fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(key + ": " + e.what());
    }
}

}  // namespace detail

inline MeshSpec mesh_spec_from_json(const json& j) {
    MeshSpec s;
    if (!j.contains("name")) throw ConfigError("meshes[]: missing 'name'");
    s.name = j.at("name");
    s.kind = detail::field_or<std::string>(j, "kind", s.kind);
    s.symmetric = detail::field_or<bool>(j, "symmetric", s.symmetric);
    s.mask_pe_exempt = detail::field_or<bool>(j, "mask_pe_exempt", s.mask_pe_exempt);
    if (j.contains("size")) {
        auto v = j.at("size").get<std::vector<double>>();
        if (v.size() != 3) throw ConfigError("meshes[].size: expected 3 numbers");
        s.size = Vec3(v[0], v[1], v[2]);
    }
    s.radius = detail::field_or<double>(j, "radius", s.radius);
    s.height = detail::field_or<double>(j, "height", s.height);
    s.subdiv = detail::field_or<int>(j, "subdiv", s.subdiv);
    s.segments = detail::field_or<int>(j, "segments", s.segments);
    s.path = detail::field_or<std::string>(j, "path", s.path);
    return s;
}

inline json mesh_spec_to_json(const MeshSpec& s) {
    return {{"name", s.name},
            {"kind", s.kind},
            {"symmetric", s.symmetric},
            {"mask_pe_exempt", s.mask_pe_exempt},
            {"size", {s.size.x(), s.size.y(), s.size.z()}},
            {"radius", s.radius},
            {"height", s.height},
            {"subdiv", s.subdiv},
            {"segments", s.segments},
            {"path", s.path}};
}

inline ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig cfg = default_config();
    cfg.seed = detail::field_or<std::uint64_t>(j, "seed", cfg.seed);
    cfg.scene_count = detail::field_or<int>(j, "scene_count", cfg.scene_count);
    if (j.contains("camera")) {
        try {
            cfg.camera = camera_from_json(j.at("camera"));
        } catch (const json::exception& e) {
            throw ConfigError(std::string("camera: ") + e.what());
        }
    }
    if (j.contains("meshes")) {
        cfg.meshes.clear();
        for (const auto& m : j.at("meshes")) cfg.meshes.push_back(mesh_spec_from_json(m));
    }
    if (j.contains("noise")) {
        const auto& n = j.at("noise");
        cfg.noise.hole_rate = detail::field_or<double>(n, "hole_rate", cfg.noise.hole_rate);
        cfg.noise.hole_blob_radius =
            detail::field_or<int>(n, "hole_blob_radius", cfg.noise.hole_blob_radius);
        cfg.noise.gaussian_sigma =
            detail::field_or<double>(n, "gaussian_sigma", cfg.noise.gaussian_sigma);
        cfg.noise.quantization_step =
            detail::field_or<double>(n, "quantization_step", cfg.noise.quantization_step);
        cfg.noise.clutter_count =
            detail::field_or<int>(n, "clutter_count", cfg.noise.clutter_count);
        cfg.noise.seed = detail::field_or<std::uint64_t>(n, "seed", cfg.noise.seed);
    }
    if (j.contains("ablation_cells")) {
        cfg.ablation_cells.clear();
        for (const auto& c : j.at("ablation_cells"))
            cfg.ablation_cells.push_back({detail::field_or<bool>(c, "box", false),
                                          detail::field_or<bool>(c, "mask", false),
                                          detail::field_or<bool>(c, "depth", false)});
    }
    cfg.train_fraction = detail::field_or<double>(j, "train_fraction", cfg.train_fraction);
    cfg.output_dir = detail::field_or<std::string>(j, "output_dir", cfg.output_dir);
    cfg.min_instances = detail::field_or<int>(j, "min_instances", cfg.min_instances);
    cfg.max_instances = detail::field_or<int>(j, "max_instances", cfg.max_instances);
    cfg.plane_depth = detail::field_or<double>(j, "plane_depth", cfg.plane_depth);
    cfg.min_depth = detail::field_or<double>(j, "min_depth", cfg.min_depth);
    cfg.max_depth = detail::field_or<double>(j, "max_depth", cfg.max_depth);
    cfg.crop_margin = detail::field_or<double>(j, "crop_margin", cfg.crop_margin);
    cfg.subsample = detail::field_or<int>(j, "subsample", cfg.subsample);
    cfg.degrade_annotations =
        detail::field_or<bool>(j, "degrade_annotations", cfg.degrade_annotations);
    cfg.abc_noise_sigma = detail::field_or<double>(j, "abc_noise_sigma", cfg.abc_noise_sigma);
    cfg.histogram_bins = detail::field_or<int>(j, "histogram_bins", cfg.histogram_bins);
    cfg.workers = detail::field_or<int>(j, "workers", cfg.workers);
    validate_config(cfg);
    return cfg;
}

inline json config_to_json(const ExperimentConfig& cfg) {
    json cells = json::array();
    for (const auto& c : cfg.ablation_cells)
        cells.push_back({{"box", c.box}, {"mask", c.mask}, {"depth", c.depth}});
    json meshes = json::array();
    for (const auto& m : cfg.meshes) meshes.push_back(mesh_spec_to_json(m));
    return {{"seed", cfg.seed},
            {"scene_count", cfg.scene_count},
            {"camera", camera_to_json(cfg.camera)},
            {"meshes", meshes},
            {"noise", noise_spec_to_json(cfg.noise)},
            {"ablation_cells", cells},
            {"train_fraction", cfg.train_fraction},
            {"output_dir", cfg.output_dir},
            {"min_instances", cfg.min_instances},
            {"max_instances", cfg.max_instances},
            {"plane_depth", cfg.plane_depth},
            {"min_depth", cfg.min_depth},
            {"max_depth", cfg.max_depth},
            {"crop_margin", cfg.crop_margin},
            {"subsample", cfg.subsample},
            {"degrade_annotations", cfg.degrade_annotations},
            {"abc_noise_sigma", cfg.abc_noise_sigma},
            {"histogram_bins", cfg.histogram_bins},
            {"workers", cfg.workers}};
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return config_from_json(j);
}

}  // namespace posebench
