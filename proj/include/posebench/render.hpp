#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "posebench/channels.hpp"
#include "posebench/mesh.hpp"
#include "posebench/rng.hpp"

namespace posebench {

struct EmptyScene : std::runtime_error {
    EmptyScene() : std::runtime_error("scene has no instances") {}
};

struct MissingAbc : std::runtime_error {
    MissingAbc() : std::runtime_error("pixel in the requested set has no abc value") {}
};

// Fronto-parallel desk plane plus optional clutter boxes. Clutter renders
// with instance_id 0: it contaminates depth around the instances without
// ever becoming a target.
struct Background {
    double plane_depth = 1.7;      // meters
    std::uint64_t clutter_seed = 0;
    int clutter_count = 0;
};

struct SceneInstance {
    std::shared_ptr<const Mesh> mesh;
    Pose pose;
};

struct Scene {
    CameraIntrinsics camera;
    std::vector<SceneInstance> instances;
    Background background;
};

inline void validate_scene(const Scene& scene) {
    if (!scene.camera.is_valid()) throw std::invalid_argument("invalid camera intrinsics");
    if (scene.instances.empty()) throw EmptyScene();
    for (const auto& inst : scene.instances) {
        if (!inst.mesh) throw std::invalid_argument("scene instance has no mesh");
        validate_pose(inst.pose);
        if (inst.pose.translation.z() <= 0)
            throw std::invalid_argument("instance translation must have positive depth");
    }
    if (scene.background.plane_depth <= 0)
        throw std::invalid_argument("background plane depth must be positive");
}

// Surface normals from the depth raster: central differences of the
// backprojected neighborhood, oriented toward the camera. Pixels without a
// fully valid in-bounds 4-neighborhood get (0,0,0); callers drop those from
// the depth loss.
inline Raster<Vec3> compute_normals(const Raster<double>& depth, const MaskRaster& valid,
                                    const CameraIntrinsics& camera, int origin_row = 0,
                                    int origin_col = 0) {
    Raster<Vec3> nrm(depth.width, depth.height, Vec3::Zero());
    auto point = [&](int i, int j) {
        return backproject(camera, origin_col + j + 0.5, origin_row + i + 0.5, depth.at(i, j));
    };
    for (int i = 0; i < depth.height; ++i) {
        for (int j = 0; j < depth.width; ++j) {
            if (!valid.at(i, j)) continue;
            if (i == 0 || j == 0 || i == depth.height - 1 || j == depth.width - 1) continue;
            if (!valid.at(i, j - 1) || !valid.at(i, j + 1) || !valid.at(i - 1, j) ||
                !valid.at(i + 1, j))
                continue;
            Vec3 du = (point(i, j + 1) - point(i, j - 1)) / 2.0;
            Vec3 dv = (point(i + 1, j) - point(i - 1, j)) / 2.0;
            Vec3 n = du.cross(dv);
            double len = n.norm();
            if (len < 1e-15) continue;
            n /= len;
            if (n.dot(point(i, j)) > 0) n = -n;
            nrm.at(i, j) = n;
        }
    }
    return nrm;
}

// Fills the derived channels from depth: raw pixel coordinates, backprojected
// camera coordinates, depth normals, position encoding. Deterministic; safe
// to re-run after the depth channel was corrupted.
inline void assemble_channels(ChannelStack& stack, PeMode pe_mode = PeMode::normalized_uv) {
    for (int i = 0; i < stack.height; ++i) {
        for (int j = 0; j < stack.width; ++j) {
            double u = stack.full_u(j), v = stack.full_v(i);
            stack.plain_uv.at(i, j) = Vec2(u, v);
            switch (pe_mode) {
                case PeMode::normalized_uv:
                    stack.pe.at(i, j) = Vec2(u / stack.camera.width, v / stack.camera.height);
                    break;
                case PeMode::zero:
                    stack.pe.at(i, j).setZero();
                    break;
            }
            if (stack.valid.at(i, j)) {
                Vec3 p = backproject(stack.camera, u, v, stack.depth.at(i, j));
                stack.xy.at(i, j) = Vec2(p.x(), p.y());
            } else {
                stack.xy.at(i, j).setZero();
            }
        }
    }
    stack.nrm = compute_normals(stack.depth, stack.valid, stack.camera, stack.origin_row,
                                stack.origin_col);
}

namespace detail {

inline Vec3 instance_albedo(std::uint64_t tag) {
    CounterRng rng(splitmix64(tag ^ 0xa1bed0u));
    return {0.25 + 0.7 * rng.uniform(), 0.25 + 0.7 * rng.uniform(), 0.25 + 0.7 * rng.uniform()};
}

inline Vec3 shade(const Vec3& albedo, const Vec3& camera_normal, const Vec3& view_point) {
    Vec3 ray = view_point.normalized();
    double diffuse = std::max(0.0, -camera_normal.dot(ray));
    Vec3 c = albedo * (0.25 + 0.75 * diffuse);
    return c.cwiseMin(1.0).cwiseMax(0.0);
}

// Z-buffer rasterization of one mesh. Perspective-correct interpolation of
// the object-frame coordinates, so per-pixel abc/depth agree with exact
// ray-plane intersection up to rounding. record_abc is off for clutter.
inline void rasterize_mesh(ChannelStack& stack, const Mesh& mesh, const Pose& pose,
                           std::int32_t id, const Vec3& albedo, bool record_abc) {
    const CameraIntrinsics& cam = stack.camera;
    constexpr double kNearPlane = 1e-6;
    for (size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tri = mesh.triangles[t];
        Vec3 obj[3] = {mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]};
        Vec3 camv[3];
        bool behind = false;
        for (int k = 0; k < 3; ++k) {
            camv[k] = apply_pose(pose, obj[k]);
            behind |= camv[k].z() <= kNearPlane;
        }
        if (behind) continue;  // no near-plane clipping: drop the triangle

        double sx[3], sy[3];
        for (int k = 0; k < 3; ++k) {
            sx[k] = cam.fx * camv[k].x() / camv[k].z() + cam.cx;
            sy[k] = cam.fy * camv[k].y() / camv[k].z() + cam.cy;
        }
        double area2 =
            (sx[1] - sx[0]) * (sy[2] - sy[0]) - (sx[2] - sx[0]) * (sy[1] - sy[0]);
        if (std::abs(area2) < 1e-14) continue;
        if (area2 < 0) {  // flip to a consistent winding in screen space
            std::swap(obj[1], obj[2]);
            std::swap(camv[1], camv[2]);
            std::swap(sx[1], sx[2]);
            std::swap(sy[1], sy[2]);
            area2 = -area2;
        }

        Vec3 obj_n = (obj[1] - obj[0]).cross(obj[2] - obj[0]);
        double obj_n_len = obj_n.norm();
        if (obj_n_len < 1e-18) continue;
        obj_n /= obj_n_len;
        Vec3 cam_n = pose.rotation * obj_n;
        // face the camera: the recorded object normal must map to the
        // visible (toward-camera) side under the pose
        if (cam_n.dot(camv[0]) > 0) {
            obj_n = -obj_n;
            cam_n = -cam_n;
        }

        int j0 = std::max(0, int(std::ceil(std::min({sx[0], sx[1], sx[2]}) - 0.5)));
        int j1 = std::min(stack.width - 1, int(std::floor(std::max({sx[0], sx[1], sx[2]}) - 0.5)));
        int i0 = std::max(0, int(std::ceil(std::min({sy[0], sy[1], sy[2]}) - 0.5)));
        int i1 = std::min(stack.height - 1, int(std::floor(std::max({sy[0], sy[1], sy[2]}) - 0.5)));

        for (int i = i0; i <= i1; ++i) {
            double py = i + 0.5;
            for (int j = j0; j <= j1; ++j) {
                double px = j + 0.5;
                double w0 = (sx[2] - sx[1]) * (py - sy[1]) - (sy[2] - sy[1]) * (px - sx[1]);
                double w1 = (sx[0] - sx[2]) * (py - sy[2]) - (sy[0] - sy[2]) * (px - sx[2]);
                double w2 = (sx[1] - sx[0]) * (py - sy[0]) - (sy[1] - sy[0]) * (px - sx[0]);
                if (w0 < 0 || w1 < 0 || w2 < 0) continue;
                double l0 = w0 / area2, l1 = w1 / area2, l2 = w2 / area2;
                double inv_z = l0 / camv[0].z() + l1 / camv[1].z() + l2 / camv[2].z();
                double z = 1.0 / inv_z;
                if (z >= stack.depth.at(i, j)) continue;  // nearest surface wins

                stack.depth.at(i, j) = z;
                stack.valid.at(i, j) = 1;
                stack.instance_id.at(i, j) = id;
                if (record_abc) {
                    Vec3 a = (obj[0] * (l0 / camv[0].z()) + obj[1] * (l1 / camv[1].z()) +
                              obj[2] * (l2 / camv[2].z())) *
                             z;
                    stack.abc.at(i, j) = a;
                    stack.obj_nrm.at(i, j) = obj_n;
                } else {
                    stack.abc.at(i, j).setZero();
                    stack.obj_nrm.at(i, j).setZero();
                }
                Vec3 p = backproject(cam, px, py, z);
                stack.rgb.at(i, j) = shade(albedo, cam_n, p);
            }
        }
    }
}

inline std::vector<SceneInstance> make_clutter(const Background& bg,
                                               const CameraIntrinsics& cam) {
    std::vector<SceneInstance> clutter;
    CounterRng rng(CounterRng::substream(bg.clutter_seed, 0x0c1u));
    for (int k = 0; k < bg.clutter_count; ++k) {
        double sx = rng.uniform(0.04, 0.16);
        double sy = rng.uniform(0.04, 0.16);
        double sz = rng.uniform(0.02, 0.10);
        auto mesh = std::make_shared<Mesh>(make_box("clutter", Vec3(sx, sy, sz), 2));
        Pose pose;
        pose.rotation = rotation_about_z(rng.uniform(0.0, 2.0 * M_PI));
        double z = rng.uniform(bg.plane_depth * 0.82, bg.plane_depth * 0.97);
        double u = rng.uniform(0.1 * cam.width, 0.9 * cam.width);
        double v = rng.uniform(0.1 * cam.height, 0.9 * cam.height);
        pose.translation = backproject(cam, u, v, z);
        clutter.push_back({mesh, pose});
    }
    return clutter;
}

}  // namespace detail

// Rasterizes the scene into a fully assembled channel stack: z-buffered depth
// over background plane, clutter and instances; per-pixel object coordinates
// and object normals on instance pixels; shaded rgb; derived channels filled
// by assemble_channels. Deterministic for identical scenes.
inline ChannelStack render_scene(const Scene& scene, PeMode pe_mode = PeMode::normalized_uv) {
    validate_scene(scene);
    ChannelStack stack(scene.camera.width, scene.camera.height, scene.camera);

    const Background& bg = scene.background;
    Vec3 plane_albedo(0.55, 0.55, 0.58);
    for (int i = 0; i < stack.height; ++i)
        for (int j = 0; j < stack.width; ++j) {
            stack.depth.at(i, j) = bg.plane_depth;
            stack.valid.at(i, j) = 1;
            Vec3 p = backproject(scene.camera, j + 0.5, i + 0.5, bg.plane_depth);
            stack.rgb.at(i, j) = detail::shade(plane_albedo, Vec3(0, 0, -1), p);
        }

    auto clutter = detail::make_clutter(bg, scene.camera);
    for (size_t k = 0; k < clutter.size(); ++k)
        detail::rasterize_mesh(stack, *clutter[k].mesh, clutter[k].pose, 0,
                               detail::instance_albedo(0x77000 + k), false);

    for (size_t k = 0; k < scene.instances.size(); ++k)
        detail::rasterize_mesh(stack, *scene.instances[k].mesh, scene.instances[k].pose,
                               std::int32_t(k + 1), detail::instance_albedo(k + 1), true);

    assemble_channels(stack, pe_mode);
    return stack;
}

// Noiseless supervision labels for one instance, from its ground-truth pose:
// camera-frame position of each visible object point and the rotated surface
// normal. `defined` marks the pixels the labels cover.
struct ReprojectedLabels {
    Raster<double> dprime;
    Raster<Vec2> xyprime;
    Raster<Vec3> nrmprime;
    MaskRaster defined;
};

inline ReprojectedLabels reproject_labels_from(const Pose& gt, const Raster<Vec3>& abc,
                                               const Raster<Vec3>& obj_nrm,
                                               const Raster<std::int32_t>& ids,
                                               std::int32_t instance_id,
                                               const MaskRaster* pixel_set = nullptr) {
    ReprojectedLabels out;
    out.dprime = Raster<double>(abc.width, abc.height, 0.0);
    out.xyprime = Raster<Vec2>(abc.width, abc.height, Vec2::Zero());
    out.nrmprime = Raster<Vec3>(abc.width, abc.height, Vec3::Zero());
    out.defined = MaskRaster(abc.width, abc.height, 0);
    for (int i = 0; i < abc.height; ++i)
        for (int j = 0; j < abc.width; ++j) {
            bool wanted =
                pixel_set ? pixel_set->at(i, j) != 0 : ids.at(i, j) == instance_id;
            if (!wanted) continue;
            if (ids.at(i, j) != instance_id) throw MissingAbc();
            Vec3 p = apply_pose(gt, abc.at(i, j));
            out.dprime.at(i, j) = p.z();
            out.xyprime.at(i, j) = Vec2(p.x(), p.y());
            out.nrmprime.at(i, j) = gt.rotation * obj_nrm.at(i, j);
            out.defined.at(i, j) = 1;
        }
    return out;
}

inline ReprojectedLabels reproject_labels(const Pose& gt, const ChannelStack& stack,
                                          std::int32_t instance_id,
                                          const MaskRaster* pixel_set = nullptr) {
    return reproject_labels_from(gt, stack.abc, stack.obj_nrm, stack.instance_id, instance_id,
                                 pixel_set);
}

}  // namespace posebench
