#pragma once

#include <atomic>
#include <exception>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "posebench/config.hpp"
#include "posebench/estimator.hpp"
#include "posebench/io.hpp"
#include "posebench/metrics.hpp"
#include "posebench/noise.hpp"
#include "posebench/pipeline.hpp"
#include "posebench/render.hpp"

namespace posebench {

namespace fs = std::filesystem;

namespace streams {
// Substream tags for the per-scene counter RNG keys.
constexpr std::uint64_t kScene = 0x5ce0e;
constexpr std::uint64_t kClutter = 0xc1a77e2;
constexpr std::uint64_t kCorrespondence = 0xc0221;
constexpr std::uint64_t kDegrade = 0xde62ade;
constexpr std::uint64_t kAbcNoise = 0xabc0;
}  // namespace streams

struct MeshTableEntry {
    MeshSpec spec;
    std::shared_ptr<const Mesh> mesh;
    double diameter = 0;
};

using MeshTable = std::vector<MeshTableEntry>;

inline MeshTable build_mesh_table(const ExperimentConfig& cfg) {
    MeshTable table;
    for (const auto& spec : cfg.meshes) {
        MeshTableEntry e{spec, build_mesh(spec), 0};
        e.diameter = mesh_diameter(*e.mesh);
        table.push_back(std::move(e));
    }
    return table;
}

inline const MeshTableEntry* find_mesh(const MeshTable& table, const std::string& name) {
    for (const auto& e : table)
        if (e.spec.name == name) return &e;
    return nullptr;
}

// Ground truth for one generated instance.
struct GtInstance {
    int mesh_index = 0;  // into the mesh table
    Pose pose;
};

struct GeneratedScene {
    Scene scene;
    std::vector<GtInstance> gt;  // instance k has id k+1 in the render
    std::uint64_t scene_seed = 0;
};

// Desk-style scene: a handful of instances at random orientations in front of
// the background plane, fully driven by the per-scene substream.
inline GeneratedScene make_scene(const ExperimentConfig& cfg, const MeshTable& meshes,
                                 int scene_index) {
    GeneratedScene out;
    out.scene_seed = mix_keys(cfg.seed, streams::kScene, std::uint64_t(scene_index));
    CounterRng rng(out.scene_seed);
    out.scene.camera = cfg.camera;
    out.scene.background.plane_depth = cfg.plane_depth;
    out.scene.background.clutter_seed =
        mix_keys(cfg.noise.seed, streams::kClutter, std::uint64_t(scene_index));
    out.scene.background.clutter_count = cfg.noise.clutter_count;

    int count = cfg.min_instances + int(rng.below(cfg.max_instances - cfg.min_instances + 1));
    for (int k = 0; k < count; ++k) {
        GtInstance gi;
        gi.mesh_index = int(rng.below(meshes.size()));
        gi.pose.rotation = nearest_rotation(random_rotation(rng));
        double z = rng.uniform(cfg.min_depth, cfg.max_depth);
        double u = rng.uniform(0.18 * cfg.camera.width, 0.82 * cfg.camera.width);
        double v = rng.uniform(0.18 * cfg.camera.height, 0.82 * cfg.camera.height);
        gi.pose.translation = backproject(cfg.camera, u, v, z);
        out.scene.instances.push_back({meshes[gi.mesh_index].mesh, gi.pose});
        out.gt.push_back(gi);
    }
    return out;
}

struct SceneData {
    GeneratedScene gen;
    ChannelStack clean;
    ChannelStack noisy;
};

inline NoiseSpec scene_noise_spec(const ExperimentConfig& cfg, int scene_index) {
    NoiseSpec spec = cfg.noise;
    spec.seed = CounterRng::substream(cfg.noise.seed, std::uint64_t(scene_index));
    return spec;
}

inline ChannelStack corrupt_stack(const ChannelStack& clean, const NoiseSpec& spec) {
    ChannelStack noisy = inject_holes(clean, spec);
    noisy = inject_depth_error(noisy, spec);
    assemble_channels(noisy);  // xy/nrm now derive from the corrupted depth
    return noisy;
}

inline SceneData prepare_scene_data(const ExperimentConfig& cfg, const MeshTable& meshes,
                                    int scene_index) {
    SceneData data;
    data.gen = make_scene(cfg, meshes, scene_index);
    data.clean = render_scene(data.gen.scene);
    data.noisy = corrupt_stack(data.clean, scene_noise_spec(cfg, scene_index));
    if (cfg.abc_noise_sigma > 0) {
        CounterRng rng(mix_keys(cfg.seed, streams::kAbcNoise, std::uint64_t(scene_index)));
        for (size_t p = 0; p < data.noisy.abc.data.size(); ++p) {
            Vec3 n(rng.normal(), rng.normal(), rng.normal());
            if (data.noisy.instance_id.data[p] > 0)
                data.noisy.abc.data[p] += cfg.abc_noise_sigma * n;
        }
    }
    return data;
}

// Runs fn(scene_index) for indices [begin, end). Work is pulled from a shared
// counter, so results must be written to per-index slots; substreams make the
// output independent of the worker count.
template <typename Fn>
inline void parallel_scene_map(int begin, int end, int workers, Fn&& fn) {
    if (workers <= 1 || end - begin <= 1) {
        for (int s = begin; s < end; ++s) fn(s);
        return;
    }
    std::atomic<int> next{begin};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            int s = next.fetch_add(1);
            if (s >= end) return;
            try {
                fn(s);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < std::min(workers, end - begin); ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

inline std::vector<InstanceAnnotation> scene_annotations(const ExperimentConfig& cfg,
                                                         const ChannelStack& noisy,
                                                         int scene_index) {
    auto anns = oracle_annotations(noisy);
    if (cfg.degrade_annotations) {
        for (size_t k = 0; k < anns.size(); ++k) {
            CounterRng rng(
                mix_keys(cfg.seed, streams::kDegrade, std::uint64_t(scene_index), k));
            anns[k] = random_degrade(anns[k], rng);
        }
    }
    return anns;
}

// Everything recorded about one (scene, instance, cell) evaluation. Carries
// the scene seed and fitted pose so any row can be recomputed in isolation.
struct InstanceRecord {
    int scene = 0;
    std::uint64_t scene_seed = 0;
    std::string cell;
    int instance = 0;
    std::string object_class;
    bool fit_ok = false;
    Pose pose;
    double add = 0, adds = 0;
    bool add_s_used = false;
    double diameter = 0;
    double loss_rt = 0, loss_abc_value = 0, loss_depth_value = 0, loss_total_value = 0;
};

constexpr double kFailedFitError = 1e9;  // meters; lands outside every threshold

namespace detail {

template <typename T>
inline Raster<T> crop_raster(const Raster<T>& src, int row0, int col0, int w, int h) {
    Raster<T> out(w, h, T{});
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) out.at(i, j) = src.at(row0 + i, col0 + j);
    return out;
}

}  // namespace detail

// Supervision labels for a (possibly cropped, possibly corrupted) patch. The
// object coordinates and normals come from the clean render, never from the
// prediction-side channels, so label quality is independent of every
// corruption knob. The label support is the patch's instance pixel set.
inline ReprojectedLabels clean_labels_for_patch(const Pose& gt, const ChannelStack& clean,
                                                const ChannelStack& patch,
                                                std::int32_t instance_id) {
    int row0 = patch.origin_row - clean.origin_row;
    int col0 = patch.origin_col - clean.origin_col;
    Raster<Vec3> abc = detail::crop_raster(clean.abc, row0, col0, patch.width, patch.height);
    Raster<Vec3> obj_nrm =
        detail::crop_raster(clean.obj_nrm, row0, col0, patch.width, patch.height);
    Raster<std::int32_t> ids =
        detail::crop_raster(clean.instance_id, row0, col0, patch.width, patch.height);
    MaskRaster pixel_set(patch.width, patch.height, 0);
    for (int i = 0; i < patch.height; ++i)
        for (int j = 0; j < patch.width; ++j)
            pixel_set.at(i, j) = patch.instance_id.at(i, j) == instance_id ? 1 : 0;
    return reproject_labels_from(gt, abc, obj_nrm, ids, instance_id, &pixel_set);
}

// Evaluates one denoising cell on one prepared scene. `calibrations` maps
// object class to its trained depth corrector; classes missing from the map
// fall back to the identity model.
inline std::vector<InstanceRecord> evaluate_cell(
    const ExperimentConfig& cfg, const MeshTable& meshes, const SceneData& data,
    const AblationCell& cell, int cell_index,
    const std::map<std::string, CalibrationModel>& calibrations, int scene_index,
    const std::vector<InstanceAnnotation>& annotations) {
    std::vector<InstanceRecord> records;
    for (size_t k = 0; k < data.gen.gt.size(); ++k) {
        std::int32_t id = std::int32_t(k + 1);
        const MeshTableEntry& entry = meshes[data.gen.gt[k].mesh_index];
        const Pose& gt = data.gen.gt[k].pose;

        const InstanceAnnotation* ann = nullptr;
        for (const auto& a : annotations)
            if (a.instance_id == id) ann = &a;
        if (!ann) continue;  // fully occluded instance: no detection, no row

        InstanceRecord rec;
        rec.scene = scene_index;
        rec.scene_seed = data.gen.scene_seed;
        rec.cell = cell.tag();
        rec.instance = int(k);
        rec.object_class = entry.spec.name;
        rec.add_s_used = entry.mesh->symmetric;
        rec.diameter = entry.diameter;

        ChannelStack owned;
        const ChannelStack* patch = &data.noisy;
        if (cell.box) {
            owned = crop_and_mask(data.noisy, *ann, cfg.crop_margin, cell.mask,
                                  !entry.spec.mask_pe_exempt);
            patch = &owned;
        } else if (cell.mask) {
            owned = crop_and_mask(data.noisy, with_full_bbox(*ann), 0.0, true,
                                  !entry.spec.mask_pe_exempt);
            patch = &owned;
        }
        if (cell.depth) {
            CalibrationModel model = CalibrationModel::identity(entry.spec.name);
            auto it = calibrations.find(entry.spec.name);
            if (it != calibrations.end()) model = it->second;
            try {
                owned = apply_calibration(fill_holes(*patch), model);
                patch = &owned;
            } catch (const AllInvalid&) {
                // nothing to fill from; the fit below reports the failure
            }
        }

        try {
            CounterRng rng(mix_keys(cfg.seed, streams::kCorrespondence,
                                    std::uint64_t(scene_index),
                                    (std::uint64_t(cell_index) << 16) | k));
            CorrespondenceSet pairs = build_correspondences(*patch, cfg.subsample, rng);
            rec.pose = fit_pose(pairs);
            rec.fit_ok = true;
            rec.add = metric_add(rec.pose, gt, *entry.mesh);
            rec.adds = metric_adds(rec.pose, gt, *entry.mesh);
        } catch (const TooFewPoints&) {
            rec.fit_ok = false;
        } catch (const DegenerateConfiguration&) {
            rec.fit_ok = false;
        }
        if (!rec.fit_ok) {
            rec.add = kFailedFitError;
            rec.adds = kFailedFitError;
        }

        // Losses against the reprojected labels on the patch extent.
        try {
            ReprojectedLabels labels = clean_labels_for_patch(gt, data.clean, *patch, id);
            MaskRaster loss_mask(patch->width, patch->height, 0);
            MaskRaster depth_mask(patch->width, patch->height, 0);
            for (int i = 0; i < patch->height; ++i)
                for (int j = 0; j < patch->width; ++j) {
                    bool base = labels.defined.at(i, j) && patch->valid.at(i, j);
                    loss_mask.at(i, j) = base ? 1 : 0;
                    depth_mask.at(i, j) =
                        base && patch->nrm.at(i, j).squaredNorm() > 0 ? 1 : 0;
                }
            Raster<Vec3> clean_abc = detail::crop_raster(
                data.clean.abc, patch->origin_row - data.clean.origin_row,
                patch->origin_col - data.clean.origin_col, patch->width, patch->height);
            rec.loss_rt = rec.fit_ok ? posebench::loss_rt(rec.pose, gt, *entry.mesh)
                                     : kFailedFitError;
            rec.loss_abc_value = loss_abc(patch->abc, clean_abc, loss_mask);
            rec.loss_depth_value =
                loss_depth({patch->depth, patch->xy, patch->nrm},
                           {labels.dprime, labels.xyprime, labels.nrmprime}, depth_mask);
            rec.loss_total_value =
                loss_total(rec.loss_rt, rec.loss_abc_value, rec.loss_depth_value, {});
        } catch (const EmptyMask&) {
            rec.loss_rt = rec.loss_abc_value = rec.loss_depth_value = rec.loss_total_value =
                kFailedFitError;
        }
        records.push_back(std::move(rec));
    }
    return records;
}

// Fits one depth calibration per object class on the first `train_scenes`
// scenes, using the canonical step-1 prep (crop+mask, then hole filling).
// Per-scene partial sums merge in scene order, so the result is bitwise
// independent of the worker count.
inline std::map<std::string, CalibrationModel> fit_calibrations(const ExperimentConfig& cfg,
                                                                const MeshTable& meshes,
                                                                int train_scenes) {
    std::vector<std::map<std::string, CalibrationFit>> partials(
        std::max(0, train_scenes));
    parallel_scene_map(0, train_scenes, cfg.workers, [&](int s) {
        SceneData data = prepare_scene_data(cfg, meshes, s);
        auto annotations = scene_annotations(cfg, data.noisy, s);
        std::map<std::string, CalibrationFit> local;
        for (size_t k = 0; k < data.gen.gt.size(); ++k) {
            std::int32_t id = std::int32_t(k + 1);
            const InstanceAnnotation* ann = nullptr;
            for (const auto& a : annotations)
                if (a.instance_id == id) ann = &a;
            if (!ann) continue;
            const MeshTableEntry& entry = meshes[data.gen.gt[k].mesh_index];
            ChannelStack patch = crop_and_mask(data.noisy, *ann, cfg.crop_margin, true,
                                               !entry.spec.mask_pe_exempt);
            try {
                patch = fill_holes(patch);
            } catch (const AllInvalid&) {
                continue;
            }
            ReprojectedLabels labels =
                clean_labels_for_patch(data.gen.gt[k].pose, data.clean, patch, id);
            local[entry.spec.name].add_patch(patch.depth, patch.valid, labels.dprime,
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
    return models;
}

struct CellReport {
    AblationCell cell;
    MetricReport report;
};

struct AblationResult {
    std::vector<CellReport> cells;
    std::vector<InstanceRecord> records;
    std::map<std::string, CalibrationModel> calibrations;
    int test_scene_begin = 0;
    int test_scene_end = 0;
};

inline std::vector<InstanceMetrics> records_to_metrics(
    const std::vector<InstanceRecord>& records, const std::string& cell_tag) {
    std::vector<InstanceMetrics> out;
    for (const auto& r : records) {
        if (r.cell != cell_tag) continue;
        out.push_back({r.scene, r.instance, r.object_class, r.add, r.adds, r.add_s_used,
                       r.diameter});
    }
    return out;
}

// Renders the corpus once per pass, corrupts it, sweeps every denoising cell
// over the test split and aggregates per-cell metric reports. Deterministic
// for a fixed config regardless of cfg.workers.
inline AblationResult run_ablation(const ExperimentConfig& cfg) {
    validate_config(cfg);
    MeshTable meshes = build_mesh_table(cfg);
    int train_n = train_scene_count(cfg);

    bool any_depth = false;
    for (const auto& c : cfg.ablation_cells) any_depth |= c.depth;
    std::map<std::string, CalibrationModel> calibrations;
    if (any_depth && train_n > 0) calibrations = fit_calibrations(cfg, meshes, train_n);

    AblationResult result;
    result.calibrations = calibrations;
    result.test_scene_begin = train_n;
    result.test_scene_end = cfg.scene_count;

    std::vector<std::vector<InstanceRecord>> per_scene(cfg.scene_count);
    parallel_scene_map(train_n, cfg.scene_count, cfg.workers, [&](int s) {
        SceneData data = prepare_scene_data(cfg, meshes, s);
        auto annotations = scene_annotations(cfg, data.noisy, s);
        std::vector<InstanceRecord> records;
        for (size_t c = 0; c < cfg.ablation_cells.size(); ++c) {
            auto cell_records = evaluate_cell(cfg, meshes, data, cfg.ablation_cells[c], int(c),
                                              calibrations, s, annotations);
            records.insert(records.end(), cell_records.begin(), cell_records.end());
        }
        per_scene[s] = std::move(records);
    });
    for (int s = train_n; s < cfg.scene_count; ++s)
        result.records.insert(result.records.end(), per_scene[s].begin(), per_scene[s].end());

    for (const auto& cell : cfg.ablation_cells) {
        auto metrics = records_to_metrics(result.records, cell.tag());
        if (metrics.empty()) throw std::runtime_error("no instances evaluated for a cell");
        result.cells.push_back({cell, aggregate_report(metrics)});
    }
    return result;
}

struct FractionRow {
    double fraction = 0;
    AblationCell cell;
    MetricReport report;
};

// Re-runs the cell sweep with the calibration trained on a shrinking share of
// the train split. Fraction 0 keeps hole filling but calibrates with the
// identity model.
inline std::vector<FractionRow> run_real_fraction_study(const ExperimentConfig& cfg,
                                                        const std::vector<double>& fractions) {
    validate_config(cfg);
    for (double f : fractions)
        if (f < 0 || f > 1) throw ConfigError("fractions: every value must be within [0,1]");
    MeshTable meshes = build_mesh_table(cfg);
    int train_n = train_scene_count(cfg);

    std::vector<FractionRow> rows;
    for (double f : fractions) {
        int train_k = int(std::lround(f * train_n));
        std::map<std::string, CalibrationModel> calibrations;
        if (train_k > 0) calibrations = fit_calibrations(cfg, meshes, train_k);

        std::vector<std::vector<InstanceRecord>> per_scene(cfg.scene_count);
        parallel_scene_map(train_n, cfg.scene_count, cfg.workers, [&](int s) {
            SceneData data = prepare_scene_data(cfg, meshes, s);
            auto annotations = scene_annotations(cfg, data.noisy, s);
            std::vector<InstanceRecord> records;
            for (size_t c = 0; c < cfg.ablation_cells.size(); ++c) {
                auto cell_records = evaluate_cell(cfg, meshes, data, cfg.ablation_cells[c],
                                                  int(c), calibrations, s, annotations);
                records.insert(records.end(), cell_records.begin(), cell_records.end());
            }
            per_scene[s] = std::move(records);
        });
        std::vector<InstanceRecord> records;
        for (int s = train_n; s < cfg.scene_count; ++s)
            records.insert(records.end(), per_scene[s].begin(), per_scene[s].end());
        for (const auto& cell : cfg.ablation_cells) {
            auto metrics = records_to_metrics(records, cell.tag());
            if (metrics.empty()) throw std::runtime_error("no instances evaluated for a cell");
            rows.push_back({f, cell, aggregate_report(metrics)});
        }
    }
    return rows;
}

struct NoiseStatsResult {
    ErrorStats pooled;
    std::size_t scenes = 0;
};

// Reprojection-error statistics of the corrupted corpus against the
// noiseless labels, pooled over every instance of every scene.
inline NoiseStatsResult run_noise_stats(const ExperimentConfig& cfg) {
    validate_config(cfg);
    MeshTable meshes = build_mesh_table(cfg);

    struct ScenePart {
        std::vector<double> signed_errors;
        std::size_t mask_pixels = 0;
        std::size_t holes = 0;
    };
    std::vector<ScenePart> parts(cfg.scene_count);
    parallel_scene_map(0, cfg.scene_count, cfg.workers, [&](int s) {
        SceneData data = prepare_scene_data(cfg, meshes, s);
        ScenePart part;
        for (size_t k = 0; k < data.gen.gt.size(); ++k) {
            std::int32_t id = std::int32_t(k + 1);
            ReprojectedLabels labels = reproject_labels(data.gen.gt[k].pose, data.clean, id);
            for (int i = 0; i < data.noisy.height; ++i)
                for (int j = 0; j < data.noisy.width; ++j) {
                    if (!labels.defined.at(i, j)) continue;
                    ++part.mask_pixels;
                    if (!data.noisy.valid.at(i, j)) {
                        ++part.holes;
                        continue;
                    }
                    part.signed_errors.push_back(data.noisy.depth.at(i, j) -
                                                 labels.dprime.at(i, j));
                }
        }
        parts[s] = std::move(part);
    });

    std::vector<double> pooled;
    std::size_t mask_pixels = 0, holes = 0;
    for (const auto& part : parts) {
        pooled.insert(pooled.end(), part.signed_errors.begin(), part.signed_errors.end());
        mask_pixels += part.mask_pixels;
        holes += part.holes;
    }
    NoiseStatsResult result;
    result.scenes = cfg.scene_count;
    result.pooled = pooled_error_stats(pooled, mask_pixels, holes, cfg.histogram_bins);
    return result;
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

inline std::string metric_report_csv(const MetricReport& report) {
    std::string out = "class,count,auc_adds,auc_add_s,acc_0_1d\n";
    auto row = [&](const ReportRow& r) {
        out += r.label + "," + std::to_string(r.count) + "," + format_double(r.auc_adds) + "," +
               format_double(r.auc_add_s) + "," + format_double(r.acc_0_1d) + "\n";
    };
    for (const auto& r : report.per_class) row(r);
    row(report.avg_class_weighted);
    row(report.avg_instance_weighted);
    return out;
}

inline json metric_report_json(const MetricReport& report) {
    json rows = json::array();
    auto row = [&](const ReportRow& r) {
        rows.push_back({{"class", r.label},
                        {"count", r.count},
                        {"auc_adds", r.auc_adds},
                        {"auc_add_s", r.auc_add_s},
                        {"acc_0_1d", r.acc_0_1d}});
    };
    for (const auto& r : report.per_class) row(r);
    row(report.avg_class_weighted);
    row(report.avg_instance_weighted);
    return {{"tau_max", report.tau_max}, {"rows", rows}};
}

inline std::string ablation_csv(const AblationResult& result) {
    std::string out = "cell,box,mask,depth,instances,auc_adds,auc_add_s,acc_0_1d\n";
    for (const auto& c : result.cells) {
        const ReportRow& avg = c.report.avg_class_weighted;
        out += c.cell.tag() + "," + std::to_string(int(c.cell.box)) + "," +
               std::to_string(int(c.cell.mask)) + "," + std::to_string(int(c.cell.depth)) + "," +
               std::to_string(avg.count) + "," + format_double(avg.auc_adds) + "," +
               format_double(avg.auc_add_s) + "," + format_double(avg.acc_0_1d) + "\n";
    }
    return out;
}

inline std::string fractions_csv(const std::vector<FractionRow>& rows) {
    std::string out = "fraction,cell,instances,auc_adds,auc_add_s,acc_0_1d\n";
    for (const auto& r : rows) {
        const ReportRow& avg = r.report.avg_class_weighted;
        out += format_double(r.fraction) + "," + r.cell.tag() + "," +
               std::to_string(avg.count) + "," + format_double(avg.auc_adds) + "," +
               format_double(avg.auc_add_s) + "," + format_double(avg.acc_0_1d) + "\n";
    }
    return out;
}

inline json instance_record_json(const InstanceRecord& r) {
    json j = pose_to_json(r.pose);
    j["scene"] = r.scene;
    j["scene_seed"] = r.scene_seed;
    j["cell"] = r.cell;
    j["instance"] = r.instance;
    j["class"] = r.object_class;
    j["fit_ok"] = r.fit_ok;
    j["add"] = r.add;
    j["adds"] = r.adds;
    j["add_s_used"] = r.add_s_used;
    j["diameter"] = r.diameter;
    j["losses"] = {{"rt", r.loss_rt},
                   {"abc", r.loss_abc_value},
                   {"depth", r.loss_depth_value},
                   {"total", r.loss_total_value}};
    return j;
}

inline json noise_stats_json(const NoiseStatsResult& r) {
    return {{"scenes", r.scenes},
            {"samples", r.pooled.sample_count},
            {"hole_fraction", r.pooled.hole_fraction},
            {"mean_abs", r.pooled.mean_abs},
            {"median_abs", r.pooled.median_abs},
            {"p95_abs", r.pooled.p95_abs},
            {"mean_signed", r.pooled.mean_signed},
            {"std_signed", r.pooled.std_signed}};
}

}  // namespace posebench
