#include <catch2/catch_amalgamated.hpp>

#include "posebench/render.hpp"
#include "test_util.hpp"

using namespace posebench;

namespace {

// Independent visibility oracle: exact ray/triangle intersection per pixel
// center (Moller-Trumbore), minimum depth over all triangles of all bodies
// plus the background plane. Shares no code with the rasterizer.
double raycast_depth(const Scene& scene, double u, double v) {
    const CameraIntrinsics& k = scene.camera;
    Vec3 dir((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);  // depth equals ray parameter t
    double best = scene.background.plane_depth;
    auto intersect = [&](const Mesh& mesh, const Pose& pose) {
        for (const auto& tri : mesh.triangles) {
            Vec3 v0 = apply_pose(pose, mesh.vertices[tri[0]]);
            Vec3 v1 = apply_pose(pose, mesh.vertices[tri[1]]);
            Vec3 v2 = apply_pose(pose, mesh.vertices[tri[2]]);
            Vec3 e1 = v1 - v0, e2 = v2 - v0;
            Vec3 pvec = dir.cross(e2);
            double det = e1.dot(pvec);
            if (std::abs(det) < 1e-14) continue;
            Vec3 tvec = -v0;
            double a = tvec.dot(pvec) / det;
            if (a < -1e-12 || a > 1 + 1e-12) continue;
            Vec3 qvec = tvec.cross(e1);
            double b = dir.dot(qvec) / det;
            if (b < -1e-12 || a + b > 1 + 1e-12) continue;
            double t = e2.dot(qvec) / det;
            if (t > 1e-6 && t < best) best = t;
        }
    };
    for (const auto& inst : scene.instances) intersect(*inst.mesh, inst.pose);
    return best;
}

Scene plate_scene(double plate_z, double plane_z) {
    Scene scene;
    scene.camera = {100, 100, 50, 50, 100, 100};
    scene.background.plane_depth = plane_z;
    Pose pose;
    pose.translation = Vec3(0, 0, plate_z);
    scene.instances.push_back({std::make_shared<Mesh>(make_square_plate("plate", 0.2)), pose});
    return scene;
}

}  // namespace

TEST_CASE("fronto-parallel plate renders constant depth and normals") {
    Scene scene = plate_scene(1.0, 5.0);
    ChannelStack stack = render_scene(scene);

    size_t covered = 0;
    for (int i = 1; i < stack.height - 1; ++i)
        for (int j = 1; j < stack.width - 1; ++j) {
            if (stack.instance_id.at(i, j) != 1) continue;
            CHECK(stack.depth.at(i, j) == Catch::Approx(1.0).margin(1e-9));
            // normals at silhouette pixels difference across the depth jump;
            // the fronto-parallel value holds over the plate interior
            bool interior = stack.instance_id.at(i - 1, j) == 1 &&
                            stack.instance_id.at(i + 1, j) == 1 &&
                            stack.instance_id.at(i, j - 1) == 1 &&
                            stack.instance_id.at(i, j + 1) == 1;
            if (!interior) continue;
            ++covered;
            CHECK((stack.nrm.at(i, j) - Vec3(0, 0, -1)).norm() < 1e-9);
        }
    CHECK(covered > 100);

    // background pixel: instance id 0, plane depth
    CHECK(stack.instance_id.at(0, 0) == 0);
    CHECK(stack.depth.at(0, 0) == Catch::Approx(5.0).margin(0));
    CHECK(stack.valid.at(0, 0) == 1);
}

TEST_CASE("rendered depth equals the ray-casting oracle") {
    Scene scene;
    scene.camera = {160, 160, 64, 48, 128, 96};
    scene.background.plane_depth = 2.5;
    CounterRng rng(17);
    Pose pose;
    pose.rotation = nearest_rotation(random_rotation(rng));
    pose.translation = Vec3(0.05, -0.03, 1.0);
    scene.instances.push_back({std::make_shared<Mesh>(make_box("cube", Vec3(0.25, 0.25, 0.25), 4)), pose});

    ChannelStack stack = render_scene(scene);
    for (int i = 0; i < stack.height; ++i)
        for (int j = 0; j < stack.width; ++j) {
            double oracle = raycast_depth(scene, j + 0.5, i + 0.5);
            CHECK(std::abs(stack.depth.at(i, j) - oracle) < 1e-6);
        }
}

TEST_CASE("curved lathe meshes also match the ray-casting oracle") {
    Scene scene;
    scene.camera = {180, 180, 64, 48, 128, 96};
    scene.background.plane_depth = 2.2;
    CounterRng rng(53);
    Pose pose;
    pose.rotation = nearest_rotation(random_rotation(rng));
    pose.translation = Vec3(-0.04, 0.02, 0.95);
    scene.instances.push_back(
        {std::make_shared<Mesh>(make_capped_can("can", 0.05, 0.1, 28)), pose});

    ChannelStack stack = render_scene(scene);
    size_t mismatches = 0;
    for (int i = 0; i < stack.height; ++i)
        for (int j = 0; j < stack.width; ++j) {
            double oracle = raycast_depth(scene, j + 0.5, i + 0.5);
            if (std::abs(stack.depth.at(i, j) - oracle) >= 1e-6) ++mismatches;
        }
    CHECK(mismatches == 0);
}

TEST_CASE("reproject_labels substitutes the rigid map per pixel") {
    CameraIntrinsics k{100, 100, 50, 50, 8, 8};
    ChannelStack stack(8, 8, k);
    stack.instance_id.at(3, 4) = 1;
    stack.abc.at(3, 4) = Vec3(0.1, -0.2, 0.3);
    stack.obj_nrm.at(3, 4) = Vec3(0, 0, 1);

    Pose gt;
    gt.translation = Vec3(0, 0, 2);
    ReprojectedLabels labels = reproject_labels(gt, stack, 1);
    CHECK(labels.defined.at(3, 4) == 1);
    CHECK(labels.dprime.at(3, 4) == Catch::Approx(2.3).margin(1e-15));
    CHECK((labels.xyprime.at(3, 4) - Vec2(0.1, -0.2)).norm() < 1e-15);

    Pose rz{rotation_about_z(M_PI / 2), Vec3(0, 0, 1)};
    stack.abc.at(3, 4) = Vec3(1, 0, 0);
    labels = reproject_labels(rz, stack, 1);
    CHECK(std::abs(labels.dprime.at(3, 4) - 1.0) < 1e-12);
    CHECK((labels.xyprime.at(3, 4) - Vec2(0, 1)).norm() < 1e-12);
}

TEST_CASE("reproject_labels flags pixels without object coordinates") {
    CameraIntrinsics k{100, 100, 50, 50, 4, 4};
    ChannelStack stack(4, 4, k);
    stack.instance_id.at(1, 1) = 1;
    MaskRaster wanted(4, 4, 0);
    wanted.at(1, 1) = 1;
    wanted.at(2, 2) = 1;  // not an instance pixel
    CHECK_THROWS_AS(reproject_labels(Pose::identity(), stack, 1, &wanted), MissingAbc);
}

TEST_CASE("labels of the generating pose match the rendered channels") {
    CounterRng rng(23);
    Scene scene;
    scene.camera = {200, 200, 64, 48, 128, 96};
    scene.background.plane_depth = 2.0;
    Pose pose;
    pose.rotation = nearest_rotation(random_rotation(rng));
    pose.translation = Vec3(0.02, 0.01, 0.9);
    scene.instances.push_back(
        {std::make_shared<Mesh>(make_capped_can("can", 0.05, 0.12, 32)), pose});
    ChannelStack stack = render_scene(scene);

    ReprojectedLabels labels = reproject_labels(pose, stack, 1);
    size_t checked = 0;
    for (int i = 0; i < stack.height; ++i)
        for (int j = 0; j < stack.width; ++j) {
            if (!labels.defined.at(i, j)) continue;
            ++checked;
            CHECK(std::abs(labels.dprime.at(i, j) - stack.depth.at(i, j)) < 1e-6);
            CHECK((labels.xyprime.at(i, j) - stack.xy.at(i, j)).norm() < 1e-6);
            CHECK(labels.nrmprime.at(i, j).norm() == Catch::Approx(1.0).margin(1e-6));
        }
    CHECK(checked > 200);
}

TEST_CASE("compute_normals on a constant raster") {
    CameraIntrinsics k{100, 100, 50, 50, 32, 32};
    Raster<double> depth(32, 32, 1.5);
    MaskRaster valid(32, 32, 1);
    Raster<Vec3> nrm = compute_normals(depth, valid, k);
    for (int i = 1; i < 31; ++i)
        for (int j = 1; j < 31; ++j)
            CHECK((nrm.at(i, j) - Vec3(0, 0, -1)).norm() < 1e-12);
    CHECK(nrm.at(0, 0).norm() == 0.0);  // border pixels have no full neighborhood
}

TEST_CASE("compute_normals on a 45-degree tilted plane") {
    // surface z = z0 - y, normal (0, -1, 1)/sqrt(2) flipped toward the camera
    CameraIntrinsics k{100, 100, 50, 50, 100, 100};
    Raster<double> depth(100, 100, 0.0);
    MaskRaster valid(100, 100, 1);
    double z0 = 2.0;
    for (int i = 0; i < 100; ++i)
        for (int j = 0; j < 100; ++j) {
            double v = i + 0.5;
            depth.at(i, j) = z0 / (1.0 + (v - k.cy) / k.fy);
        }
    Raster<Vec3> nrm = compute_normals(depth, valid, k);
    Vec3 expected(0, -std::sqrt(0.5), -std::sqrt(0.5));
    for (int i = 10; i < 90; i += 17)
        for (int j = 10; j < 90; j += 13)
            CHECK((nrm.at(i, j) - expected).norm() < 1e-3);
}

TEST_CASE("depth normals match mesh face normals on a cube") {
    CounterRng rng(31);
    Scene scene;
    scene.camera = {240, 240, 64, 48, 128, 96};
    scene.background.plane_depth = 2.5;
    Pose pose;
    pose.rotation = nearest_rotation(random_rotation(rng));
    pose.translation = Vec3(0, 0, 1.0);
    auto mesh = std::make_shared<Mesh>(make_box("cube", Vec3(0.22, 0.22, 0.22), 4));
    scene.instances.push_back({mesh, pose});
    ChannelStack stack = render_scene(scene);

    // compare only pixels whose whole 5x5 neighborhood lies on the same face;
    // finite differences across face edges mix two normals
    size_t checked = 0;
    for (int i = 2; i < stack.height - 2; ++i)
        for (int j = 2; j < stack.width - 2; ++j) {
            bool same_face = stack.instance_id.at(i, j) == 1;
            for (int di = -2; di <= 2 && same_face; ++di)
                for (int dj = -2; dj <= 2; ++dj)
                    if (stack.instance_id.at(i + di, j + dj) != 1 ||
                        (stack.obj_nrm.at(i + di, j + dj) - stack.obj_nrm.at(i, j)).norm() >
                            1e-12) {
                        same_face = false;
                        break;
                    }
            if (!same_face) continue;
            ++checked;
            Vec3 expected = pose.rotation * stack.obj_nrm.at(i, j);
            CHECK((stack.nrm.at(i, j) - expected).norm() < 1e-2);
        }
    CHECK(checked > 50);
}

TEST_CASE("assemble_channels coordinate conventions") {
    CameraIntrinsics k{100, 100, 50, 50, 100, 100};
    ChannelStack stack(100, 100, k);
    CounterRng rng(37);
    for (int i = 0; i < 100; ++i)
        for (int j = 0; j < 100; ++j) {
            stack.depth.at(i, j) = rng.uniform(0.5, 3.0);
            stack.valid.at(i, j) = 1;
        }
    assemble_channels(stack);

    CHECK((stack.plain_uv.at(0, 0) - Vec2(0.5, 0.5)).norm() == 0.0);
    CHECK((stack.pe.at(50, 50) - Vec2(0.505, 0.505)).norm() < 1e-15);

    for (int i = 0; i < 100; i += 7)
        for (int j = 0; j < 100; j += 11) {
            Vec3 p = backproject(k, j + 0.5, i + 0.5, stack.depth.at(i, j));
            CHECK((stack.xy.at(i, j) - Vec2(p.x(), p.y())).norm() < 1e-9);
        }
}

TEST_CASE("depth buffer monotonicity under added instances") {
    Scene scene = plate_scene(1.2, 4.0);
    ChannelStack before = render_scene(scene);

    Pose pose2;
    pose2.translation = Vec3(0.05, 0.05, 0.8);
    scene.instances.push_back(
        {std::make_shared<Mesh>(make_box("occluder", Vec3(0.15, 0.15, 0.15), 3)), pose2});
    ChannelStack after = render_scene(scene);

    for (size_t p = 0; p < before.depth.data.size(); ++p)
        CHECK(after.depth.data[p] <= before.depth.data[p] + 1e-12);
}

TEST_CASE("abc values stay inside the mesh bounding box") {
    CounterRng rng(41);
    Scene scene;
    scene.camera = {160, 160, 64, 48, 128, 96};
    scene.background.plane_depth = 2.0;
    auto mesh = std::make_shared<Mesh>(make_cylinder("cyl", 0.06, 0.15, 36));
    Pose pose;
    pose.rotation = nearest_rotation(random_rotation(rng));
    pose.translation = Vec3(0, 0, 0.9);
    scene.instances.push_back({mesh, pose});
    ChannelStack stack = render_scene(scene);

    Vec3 lo, hi;
    mesh_bounds(*mesh, lo, hi);
    for (int i = 0; i < stack.height; ++i)
        for (int j = 0; j < stack.width; ++j) {
            if (stack.instance_id.at(i, j) != 1) continue;
            const Vec3& a = stack.abc.at(i, j);
            for (int c = 0; c < 3; ++c) {
                CHECK(a[c] >= lo[c] - 1e-9);
                CHECK(a[c] <= hi[c] + 1e-9);
            }
        }
}

TEST_CASE("rendering is deterministic") {
    Scene scene = plate_scene(1.0, 3.0);
    scene.background.clutter_seed = 99;
    scene.background.clutter_count = 3;
    ChannelStack a = render_scene(scene);
    ChannelStack b = render_scene(scene);
    CHECK(a.depth == b.depth);
    CHECK(a.rgb == b.rgb);
    CHECK(a.abc == b.abc);
    CHECK(a.instance_id == b.instance_id);
    CHECK(a.nrm == b.nrm);
}

TEST_CASE("empty scene is rejected") {
    Scene scene;
    scene.camera = {100, 100, 50, 50, 64, 64};
    CHECK_THROWS_AS(render_scene(scene), EmptyScene);
}
