#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <stdexcept>

#include "posebench/rng.hpp"

namespace posebench {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct NonPositiveDepth : std::runtime_error {
    NonPositiveDepth() : std::runtime_error("depth must be positive") {}
};

// Rigid transform mapping object-frame points into the camera frame.
// Rotation is kept as a plain 3x3 matrix; everything downstream (losses,
// metrics, fitting) consumes the matrix form directly.
struct Pose {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    static Pose identity() { return {}; }
};

inline Vec3 apply_pose(const Pose& p, const Vec3& q) {
    return p.rotation * q + p.translation;
}

inline Pose compose(const Pose& p1, const Pose& p2) {
    return {p1.rotation * p2.rotation, p1.rotation * p2.translation + p1.translation};
}

inline Pose invert(const Pose& p) {
    Mat3 rt = p.rotation.transpose();
    return {rt, -(rt * p.translation)};
}

// R orthonormal to 1e-9 per entry and det +1 to 1e-9; reflections rejected.
inline bool pose_is_valid(const Pose& p, double tol = 1e-9) {
    Mat3 gram = p.rotation.transpose() * p.rotation;
    if (((gram - Mat3::Identity()).cwiseAbs().maxCoeff()) > tol) return false;
    if (std::abs(p.rotation.determinant() - 1.0) > tol) return false;
    return p.translation.allFinite();
}

inline void validate_pose(const Pose& p, double tol = 1e-9) {
    if (!pose_is_valid(p, tol))
        throw std::invalid_argument("rotation is not a proper orthonormal matrix");
}

// Nearest rotation in Frobenius norm (polar projection via SVD, with the
// determinant sign fix). Used to clean up fitted or deserialized rotations.
inline Mat3 nearest_rotation(const Mat3& m) {
    Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 u = svd.matrixU();
    Mat3 v = svd.matrixV();
    Mat3 d = Mat3::Identity();
    d(2, 2) = (u * v.transpose()).determinant() < 0 ? -1.0 : 1.0;
    return u * d * v.transpose();
}

inline Pose orthonormalized(const Pose& p) {
    return {nearest_rotation(p.rotation), p.translation};
}

inline Mat3 rotation_about_z(double radians) {
    double c = std::cos(radians), s = std::sin(radians);
    Mat3 r;
    r << c, -s, 0, s, c, 0, 0, 0, 1;
    return r;
}

inline Mat3 rotation_about_x(double radians) {
    double c = std::cos(radians), s = std::sin(radians);
    Mat3 r;
    r << 1, 0, 0, 0, c, -s, 0, s, c;
    return r;
}

inline Mat3 rotation_about_y(double radians) {
    double c = std::cos(radians), s = std::sin(radians);
    Mat3 r;
    r << c, 0, s, 0, 1, 0, -s, 0, c;
    return r;
}

// Uniform random rotation via a normalized Gaussian quaternion.
inline Mat3 random_rotation(CounterRng& rng) {
    double q[4];
    for (double& v : q) v = rng.normal();
    double n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
    double w = q[0] / n, x = q[1] / n, y = q[2] / n, z = q[3] / n;
    Mat3 r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

// Pinhole camera. Pixel (i, j) (row, column) has center (u, v) = (j+0.5, i+0.5),
// so u runs along columns and v along rows.
struct CameraIntrinsics {
    double fx = 0, fy = 0;
    double cx = 0, cy = 0;
    int width = 0, height = 0;

    bool is_valid() const {
        return fx > 0 && fy > 0 && width > 0 && height > 0 && cx >= 0 && cx < width &&
               cy >= 0 && cy < height;
    }
};

struct PixelRay {
    double u = 0, v = 0;  // pixels
    double d = 0;         // meters
};

inline PixelRay project(const CameraIntrinsics& k, const Vec3& q) {
    if (q.z() <= 0.0) throw NonPositiveDepth();
    return {k.fx * q.x() / q.z() + k.cx, k.fy * q.y() / q.z() + k.cy, q.z()};
}

inline Vec3 backproject(const CameraIntrinsics& k, double u, double v, double d) {
    if (d <= 0.0) throw NonPositiveDepth();
    return {(u - k.cx) * d / k.fx, (v - k.cy) * d / k.fy, d};
}

inline double pixel_center_u(int col) { return col + 0.5; }
inline double pixel_center_v(int row) { return row + 0.5; }

}  // namespace posebench
