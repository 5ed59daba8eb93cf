#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "posebench/harness.hpp"

namespace posebench {

// File-based pipeline stages. Each stage reads the previous stage's directory
// under the output root:
//
//   clean/     scene_%04d.{chan,json,meta.json,pgm}   (simulate)
//   noisy/     scene_%04d.{chan,json,pgm}             (corrupt)
//   denoised/  scene_%04d_inst_%d.{chan,json},        (denoise)
//              scene_%04d.annotations.json, calibration.json
//   poses.json                                        (estimate)
//   report.{csv,json}                                 (evaluate)
//
// Stages never re-render: everything after `simulate` works from the files,
// so the raster and JSON formats are the contract between them.

namespace detail {

inline std::string scene_tag(int s) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "scene_%04d", s);
    return buf;
}

inline fs::path require_dir(const fs::path& dir, const std::string& producer) {
    if (!fs::exists(dir))
        throw std::runtime_error(dir.string() + " is missing; run `" + producer + "` first");
    return dir;
}

}  // namespace detail

inline json scene_meta_to_json(const ExperimentConfig& cfg, const MeshTable& meshes,
                               const GeneratedScene& gen, int scene_index) {
    json instances = json::array();
    for (const auto& gi : gen.gt) {
        json inst = pose_to_json(gi.pose);
        inst["class"] = meshes[gi.mesh_index].spec.name;
        instances.push_back(inst);
    }
    return {{"scene", scene_index},
            {"scene_seed", gen.scene_seed},
            {"camera", camera_to_json(cfg.camera)},
            {"plane_depth", cfg.plane_depth},
            {"clutter_seed", gen.scene.background.clutter_seed},
            {"clutter_count", gen.scene.background.clutter_count},
            {"instances", instances}};
}

struct SceneMeta {
    int scene = 0;
    std::uint64_t scene_seed = 0;
    std::vector<std::string> classes;
    std::vector<Pose> gt_poses;
};

inline SceneMeta scene_meta_from_json(const json& j) {
    SceneMeta meta;
    meta.scene = j.at("scene");
    meta.scene_seed = j.at("scene_seed");
    for (const auto& inst : j.at("instances")) {
        meta.classes.push_back(inst.at("class"));
        meta.gt_poses.push_back(pose_from_json(inst));
    }
    return meta;
}

inline void cmd_simulate(const ExperimentConfig& cfg, const std::string& out_root) {
    validate_config(cfg);
    MeshTable meshes = build_mesh_table(cfg);
    fs::path dir = fs::path(out_root) / "clean";
    fs::create_directories(dir);
    parallel_scene_map(0, cfg.scene_count, cfg.workers, [&](int s) {
        GeneratedScene gen = make_scene(cfg, meshes, s);
        ChannelStack clean = render_scene(gen.scene);
        std::string tag = detail::scene_tag(s);
        save_channel_stack(clean, (dir / (tag + ".chan")).string(),
                           (dir / (tag + ".json")).string());
        save_depth_pgm(clean.depth, (dir / (tag + ".pgm")).string());
        write_text_file((dir / (tag + ".meta.json")).string(),
                        scene_meta_to_json(cfg, meshes, gen, s).dump(2) + "\n");
    });
    write_text_file((fs::path(out_root) / "corpus.json").string(),
                    config_to_json(cfg).dump(2) + "\n");
}

inline void cmd_corrupt(const ExperimentConfig& cfg, const std::string& out_root) {
    validate_config(cfg);
    fs::path clean_dir = detail::require_dir(fs::path(out_root) / "clean", "simulate");
    fs::path dir = fs::path(out_root) / "noisy";
    fs::create_directories(dir);
    parallel_scene_map(0, cfg.scene_count, cfg.workers, [&](int s) {
        std::string tag = detail::scene_tag(s);
        ChannelStack clean = load_channel_stack((clean_dir / (tag + ".chan")).string(),
                                                (clean_dir / (tag + ".json")).string());
        ChannelStack noisy = corrupt_stack(clean, scene_noise_spec(cfg, s));
        save_channel_stack(noisy, (dir / (tag + ".chan")).string(),
                           (dir / (tag + ".json")).string());
        save_depth_pgm(noisy.depth, (dir / (tag + ".pgm")).string());
    });
}

// Applies the full two-step pipeline (crop+mask, hole filling, calibration)
// to every test-scene instance. Calibration is fit from the train-split files.
inline void cmd_denoise(const ExperimentConfig& cfg, const std::string& out_root) {
    validate_config(cfg);
    MeshTable meshes = build_mesh_table(cfg);
    fs::path noisy_dir = detail::require_dir(fs::path(out_root) / "noisy", "corrupt");
    fs::path clean_dir = detail::require_dir(fs::path(out_root) / "clean", "simulate");
    fs::path dir = fs::path(out_root) / "denoised";
    fs::create_directories(dir);
    int train_n = train_scene_count(cfg);

    auto load_scene = [&](int s) {
        std::string tag = detail::scene_tag(s);
        ChannelStack noisy = load_channel_stack((noisy_dir / (tag + ".chan")).string(),
                                                (noisy_dir / (tag + ".json")).string());
        ChannelStack clean = load_channel_stack((clean_dir / (tag + ".chan")).string(),
                                                (clean_dir / (tag + ".json")).string());
        SceneMeta meta = scene_meta_from_json(
            json::parse(read_text_file((clean_dir / (tag + ".meta.json")).string())));
        return std::tuple(std::move(noisy), std::move(clean), std::move(meta));
    };

    std::vector<std::map<std::string, CalibrationFit>> partials(std::max(0, train_n));
    parallel_scene_map(0, train_n, cfg.workers, [&](int s) {
        auto [noisy, clean, meta] = load_scene(s);
        auto annotations = scene_annotations(cfg, noisy, s);
        std::map<std::string, CalibrationFit> local;
        for (size_t k = 0; k < meta.classes.size(); ++k) {
            const InstanceAnnotation* ann = nullptr;
            for (const auto& a : annotations)
                if (a.instance_id == std::int32_t(k + 1)) ann = &a;
            if (!ann) continue;
            const MeshTableEntry* entry = find_mesh(meshes, meta.classes[k]);
            if (!entry) throw std::runtime_error("unknown class in meta: " + meta.classes[k]);
            ChannelStack patch = crop_and_mask(noisy, *ann, cfg.crop_margin, true,
                                               !entry->spec.mask_pe_exempt);
            try {
                patch = fill_holes(patch);
            } catch (const AllInvalid&) {
                continue;
            }
            ReprojectedLabels labels =
                clean_labels_for_patch(meta.gt_poses[k], clean, patch, std::int32_t(k + 1));
            local[meta.classes[k]].add_patch(patch.depth, patch.valid, labels.dprime,
                                             labels.defined);
        }
        partials[s] = std::move(local);
    });
    std::map<std::string, CalibrationFit> merged;
    for (const auto& local : partials)
        for (const auto& [cls, fit] : local) merged[cls].merge(fit);
    std::map<std::string, CalibrationModel> models;
    for (const auto& [cls, fit] : merged) {
        try {
            models[cls] = fit.solve(cls);
        } catch (const DegenerateFit&) {
            models[cls] = CalibrationModel::identity(cls);
        }
    }
    json calib = json::array();
    for (const auto& [cls, model] : models) calib.push_back(calibration_to_json(model));
    write_text_file((dir / "calibration.json").string(), calib.dump(2) + "\n");

    parallel_scene_map(train_n, cfg.scene_count, cfg.workers, [&](int s) {
        auto [noisy, clean, meta] = load_scene(s);
        auto annotations = scene_annotations(cfg, noisy, s);
        json anns_json = json::array();
        for (const auto& a : annotations) anns_json.push_back(annotation_to_json(a));
        std::string tag = detail::scene_tag(s);
        write_text_file((dir / (tag + ".annotations.json")).string(),
                        anns_json.dump(2) + "\n");
        for (size_t k = 0; k < meta.classes.size(); ++k) {
            const InstanceAnnotation* ann = nullptr;
            for (const auto& a : annotations)
                if (a.instance_id == std::int32_t(k + 1)) ann = &a;
            if (!ann) continue;
            const MeshTableEntry* entry = find_mesh(meshes, meta.classes[k]);
            if (!entry) throw std::runtime_error("unknown class in meta: " + meta.classes[k]);
            ChannelStack patch = crop_and_mask(noisy, *ann, cfg.crop_margin, true,
                                               !entry->spec.mask_pe_exempt);
            try {
                patch = fill_holes(patch);
            } catch (const AllInvalid&) {
                continue;
            }
            CalibrationModel model = CalibrationModel::identity(meta.classes[k]);
            if (auto it = models.find(meta.classes[k]); it != models.end()) model = it->second;
            patch = apply_calibration(patch, model);
            std::string ptag = tag + "_inst_" + std::to_string(k);
            save_channel_stack(patch, (dir / (ptag + ".chan")).string(),
                               (dir / (ptag + ".json")).string());
        }
    });
}

inline void cmd_estimate(const ExperimentConfig& cfg, const std::string& out_root) {
    validate_config(cfg);
    MeshTable meshes = build_mesh_table(cfg);
    fs::path den_dir = detail::require_dir(fs::path(out_root) / "denoised", "denoise");
    fs::path clean_dir = detail::require_dir(fs::path(out_root) / "clean", "simulate");
    int train_n = train_scene_count(cfg);

    std::vector<std::vector<InstanceRecord>> per_scene(cfg.scene_count);
    parallel_scene_map(train_n, cfg.scene_count, cfg.workers, [&](int s) {
        std::string tag = detail::scene_tag(s);
        SceneMeta meta = scene_meta_from_json(
            json::parse(read_text_file((clean_dir / (tag + ".meta.json")).string())));
        ChannelStack clean = load_channel_stack((clean_dir / (tag + ".chan")).string(),
                                                (clean_dir / (tag + ".json")).string());
        std::vector<InstanceRecord> records;
        for (size_t k = 0; k < meta.classes.size(); ++k) {
            std::string ptag = tag + "_inst_" + std::to_string(k);
            fs::path chan = den_dir / (ptag + ".chan");
            if (!fs::exists(chan)) continue;
            ChannelStack patch =
                load_channel_stack(chan.string(), (den_dir / (ptag + ".json")).string());
            const MeshTableEntry* entry = find_mesh(meshes, meta.classes[k]);
            if (!entry) throw std::runtime_error("unknown class in meta: " + meta.classes[k]);

            InstanceRecord rec;
            rec.scene = s;
            rec.scene_seed = meta.scene_seed;
            rec.cell = "two_step";
            rec.instance = int(k);
            rec.object_class = meta.classes[k];
            rec.add_s_used = entry->mesh->symmetric;
            rec.diameter = entry->diameter;
            try {
                CounterRng rng(mix_keys(cfg.seed, streams::kCorrespondence, std::uint64_t(s),
                                        (std::uint64_t(0xd) << 16) | k));
                CorrespondenceSet pairs = build_correspondences(patch, cfg.subsample, rng);
                rec.pose = fit_pose(pairs);
                rec.fit_ok = true;
                rec.add = metric_add(rec.pose, meta.gt_poses[k], *entry->mesh);
                rec.adds = metric_adds(rec.pose, meta.gt_poses[k], *entry->mesh);
            } catch (const TooFewPoints&) {
            } catch (const DegenerateConfiguration&) {
            }
            if (!rec.fit_ok) rec.add = rec.adds = kFailedFitError;
            try {
                ReprojectedLabels labels =
                    clean_labels_for_patch(meta.gt_poses[k], clean, patch, std::int32_t(k + 1));
                MaskRaster loss_mask(patch.width, patch.height, 0);
                MaskRaster depth_mask(patch.width, patch.height, 0);
                for (int i = 0; i < patch.height; ++i)
                    for (int j = 0; j < patch.width; ++j) {
                        bool base = labels.defined.at(i, j) && patch.valid.at(i, j);
                        loss_mask.at(i, j) = base;
                        depth_mask.at(i, j) = base && patch.nrm.at(i, j).squaredNorm() > 0;
                    }
                Raster<Vec3> clean_abc =
                    detail::crop_raster(clean.abc, patch.origin_row, patch.origin_col,
                                        patch.width, patch.height);
                rec.loss_rt =
                    rec.fit_ok ? loss_rt(rec.pose, meta.gt_poses[k], *entry->mesh)
                               : kFailedFitError;
                rec.loss_abc_value = loss_abc(patch.abc, clean_abc, loss_mask);
                rec.loss_depth_value =
                    loss_depth({patch.depth, patch.xy, patch.nrm},
                               {labels.dprime, labels.xyprime, labels.nrmprime}, depth_mask);
                rec.loss_total_value =
                    loss_total(rec.loss_rt, rec.loss_abc_value, rec.loss_depth_value, {});
            } catch (const EmptyMask&) {
                rec.loss_rt = rec.loss_abc_value = rec.loss_depth_value =
                    rec.loss_total_value = kFailedFitError;
            }
            records.push_back(std::move(rec));
        }
        per_scene[s] = std::move(records);
    });

    json out = json::array();
    for (int s = train_n; s < cfg.scene_count; ++s)
        for (const auto& rec : per_scene[s]) out.push_back(instance_record_json(rec));
    write_text_file((fs::path(out_root) / "poses.json").string(), out.dump(2) + "\n");
}

inline void cmd_evaluate(const ExperimentConfig& cfg, const std::string& out_root) {
    validate_config(cfg);
    MeshTable meshes = build_mesh_table(cfg);
    fs::path root(out_root);
    fs::path clean_dir = detail::require_dir(root / "clean", "simulate");
    fs::path noisy_dir = detail::require_dir(root / "noisy", "corrupt");
    fs::path den_dir = detail::require_dir(root / "denoised", "denoise");
    if (!fs::exists(root / "poses.json"))
        throw std::runtime_error((root / "poses.json").string() +
                                 " is missing; run `estimate` first");

    json poses = json::parse(read_text_file((root / "poses.json").string()));
    std::vector<InstanceMetrics> metrics;
    for (const auto& rec : poses) {
        int s = rec.at("scene");
        int k = rec.at("instance");
        std::string cls = rec.at("class");
        const MeshTableEntry* entry = find_mesh(meshes, cls);
        if (!entry) throw std::runtime_error("unknown class in poses.json: " + cls);
        SceneMeta meta = scene_meta_from_json(json::parse(read_text_file(
            (clean_dir / (detail::scene_tag(s) + ".meta.json")).string())));
        InstanceMetrics m;
        m.scene = s;
        m.instance = k;
        m.object_class = cls;
        m.add_s_used = entry->mesh->symmetric;
        m.diameter = entry->diameter;
        if (rec.at("fit_ok").get<bool>()) {
            Pose pose = orthonormalized(pose_from_json(rec));
            m.add = metric_add(pose, meta.gt_poses[k], *entry->mesh);
            m.adds = metric_adds(pose, meta.gt_poses[k], *entry->mesh);
        } else {
            m.add = m.adds = kFailedFitError;
        }
        metrics.push_back(std::move(m));
    }
    if (metrics.empty()) throw std::runtime_error("poses.json holds no estimates");
    MetricReport report = aggregate_report(metrics);
    write_text_file((root / "report.csv").string(), metric_report_csv(report));

    // segmentation quality of the annotations the pipeline actually used
    std::vector<MaskRaster> used, oracle;
    int train_n = train_scene_count(cfg);
    for (int s = train_n; s < cfg.scene_count; ++s) {
        std::string tag = detail::scene_tag(s);
        fs::path ann_path = den_dir / (tag + ".annotations.json");
        if (!fs::exists(ann_path)) continue;
        ChannelStack noisy = load_channel_stack((noisy_dir / (tag + ".chan")).string(),
                                                (noisy_dir / (tag + ".json")).string());
        auto oracle_anns = oracle_annotations(noisy);
        for (const auto& aj : json::parse(read_text_file(ann_path.string()))) {
            InstanceAnnotation ann = annotation_from_json(aj);
            for (const auto& oa : oracle_anns)
                if (oa.instance_id == ann.instance_id) {
                    used.push_back(annotation_mask_full(ann));
                    oracle.push_back(annotation_mask_full(oa));
                }
        }
    }
    json summary = metric_report_json(report);
    summary["miou"] = used.empty() ? 1.0 : miou(used, oracle);
    write_text_file((root / "report.json").string(), summary.dump(2) + "\n");
}

}  // namespace posebench
