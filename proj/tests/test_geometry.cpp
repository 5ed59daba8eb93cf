#include <catch2/catch_amalgamated.hpp>

#include "posebench/geometry.hpp"
#include "test_util.hpp"

using namespace posebench;
using testutil::random_point;
using testutil::random_pose;

TEST_CASE("apply_pose basic cases") {
    Pose id = Pose::identity();
    CHECK(apply_pose(id, Vec3(0.1, -0.2, 0.3)).isApprox(Vec3(0.1, -0.2, 0.3), 0));

    Pose shift;
    shift.translation = Vec3(0, 0, 2);
    CHECK(apply_pose(shift, Vec3(0.1, -0.2, 0.3)).isApprox(Vec3(0.1, -0.2, 2.3), 1e-15));

    Pose rz{rotation_about_z(M_PI / 2), Vec3::Zero()};
    CHECK((apply_pose(rz, Vec3(1, 0, 0)) - Vec3(0, 1, 0)).norm() < 1e-15);
}

TEST_CASE("compose identity and group laws") {
    CounterRng rng(42);
    Pose p = random_pose(rng);

    Pose with_id = compose(Pose::identity(), p);
    CHECK((with_id.rotation - p.rotation).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((with_id.translation - p.translation).norm() < 1e-15);

    Pose inv = compose(p, invert(p));
    CHECK((inv.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(inv.translation.norm() < 1e-12);

    Pose rz90{rotation_about_z(M_PI / 2), Vec3::Zero()};
    Pose rz180 = compose(rz90, rz90);
    CHECK((rz180.rotation - rotation_about_z(M_PI)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("invert basic and round trip") {
    CHECK(invert(Pose::identity()).rotation.isIdentity(1e-15));

    Pose shift;
    shift.translation = Vec3(0, 0, 2);
    CHECK((invert(shift).translation - Vec3(0, 0, -2)).norm() < 1e-15);

    CounterRng rng(7);
    Pose p = random_pose(rng);
    Pose pinv = invert(p);
    for (int i = 0; i < 10; ++i) {
        Vec3 q = random_point(rng);
        CHECK((apply_pose(pinv, apply_pose(p, q)) - q).norm() < 1e-12);
    }
}

TEST_CASE("compose is associative") {
    CounterRng rng(11);
    for (int i = 0; i < 50; ++i) {
        Pose a = random_pose(rng), b = random_pose(rng), c = random_pose(rng);
        Pose left = compose(compose(a, b), c);
        Pose right = compose(a, compose(b, c));
        CHECK((left.rotation - right.rotation).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((left.translation - right.translation).norm() < 1e-12);
    }
}

TEST_CASE("rigidity: pose application preserves distances") {
    CounterRng rng(13);
    for (int i = 0; i < 100; ++i) {
        Pose p = random_pose(rng);
        Vec3 a = random_point(rng), b = random_point(rng);
        double before = (a - b).norm();
        double after = (apply_pose(p, a) - apply_pose(p, b)).norm();
        CHECK(std::abs(before - after) < 1e-9);
    }
}

TEST_CASE("project basic cases") {
    CameraIntrinsics k{100, 100, 50, 50, 100, 100};
    PixelRay r = project(k, Vec3(0, 0, 1));
    CHECK(r.u == Catch::Approx(50.0).margin(1e-12));
    CHECK(r.v == Catch::Approx(50.0).margin(1e-12));
    CHECK(r.d == Catch::Approx(1.0).margin(0));

    r = project(k, Vec3(0.5, 0, 1));
    CHECK(r.u == Catch::Approx(100.0).margin(1e-12));
    CHECK(r.v == Catch::Approx(50.0).margin(1e-12));

    CHECK_THROWS_AS(project(k, Vec3(0, 0, 0)), NonPositiveDepth);
    CHECK_THROWS_AS(project(k, Vec3(0, 0, -1)), NonPositiveDepth);
}

TEST_CASE("backproject basic cases") {
    CameraIntrinsics k{100, 100, 50, 50, 100, 100};
    CHECK((backproject(k, 50, 50, 2) - Vec3(0, 0, 2)).norm() < 1e-15);
    CHECK((backproject(k, 100, 50, 1) - Vec3(0.5, 0, 1)).norm() < 1e-15);
    CHECK_THROWS_AS(backproject(k, 10, 10, 0), NonPositiveDepth);
}

TEST_CASE("project/backproject round trips") {
    CameraIntrinsics k{123.5, 118.25, 81.5, 59.25, 160, 120};
    CounterRng rng(99);
    for (int i = 0; i < 100; ++i) {
        Vec3 q(rng.uniform(-0.8, 0.8), rng.uniform(-0.6, 0.6), rng.uniform(0.3, 3.0));
        PixelRay r = project(k, q);
        CHECK((backproject(k, r.u, r.v, r.d) - q).norm() < 1e-9);
    }
    for (int i = 0; i < 12; ++i)
        for (int j = 0; j < 16; ++j) {
            double d = 0.1 + 9.9 * (i * 16 + j) / (12.0 * 16.0);
            Vec3 q = backproject(k, pixel_center_u(j * 10), pixel_center_v(i * 10), d);
            PixelRay r = project(k, q);
            CHECK(std::abs(r.u - pixel_center_u(j * 10)) < 1e-9);
            CHECK(std::abs(r.v - pixel_center_v(i * 10)) < 1e-9);
            CHECK(std::abs(r.d - d) < 1e-9);
        }
}

TEST_CASE("pose validation rejects reflections and junk") {
    Pose reflect;
    reflect.rotation = Mat3::Identity();
    reflect.rotation(2, 2) = -1;  // det = -1 but orthonormal
    CHECK_FALSE(pose_is_valid(reflect));
    CHECK_THROWS_AS(validate_pose(reflect), std::invalid_argument);

    Pose skew;
    skew.rotation = Mat3::Identity();
    skew.rotation(0, 1) = 1e-6;
    CHECK_FALSE(pose_is_valid(skew));

    CHECK(pose_is_valid(Pose::identity()));
    CounterRng rng(5);
    CHECK(pose_is_valid(random_pose(rng)));
}

TEST_CASE("nearest_rotation projects back to SO(3)") {
    CounterRng rng(21);
    Pose p = random_pose(rng);
    Mat3 noisy = p.rotation;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) noisy(i, j) += 1e-4 * rng.uniform(-1, 1);
    Mat3 r = nearest_rotation(noisy);
    CHECK((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(r.determinant() == Catch::Approx(1.0).margin(1e-12));
    CHECK((r - p.rotation).cwiseAbs().maxCoeff() < 1e-3);
}
