#pragma once

#include <cstdint>

#include "posebench/geometry.hpp"
#include "posebench/raster.hpp"

namespace posebench {

enum class PeMode {
    normalized_uv,  // ((j+0.5)/W, (i+0.5)/H) of the full sensor raster
    zero,
};

// Per-pixel channel bundle for one view (or a cropped patch of one).
//
// Conventions:
//  - invalid pixels carry the depth sentinel 0.0 and zeros in derived channels
//  - plain_uv / pe always keep full-image pixel coordinates; cropping moves
//    origin_row/origin_col instead of relabeling the coordinates
//  - abc and obj_nrm are defined where instance_id > 0
struct ChannelStack {
    int width = 0;
    int height = 0;
    CameraIntrinsics camera;  // intrinsics of the original full raster
    int origin_row = 0;       // offset of this patch inside the full raster
    int origin_col = 0;

    Raster<Vec3> rgb;
    Raster<double> depth;
    Raster<std::uint8_t> valid;
    Raster<Vec2> plain_uv;
    Raster<Vec2> xy;
    Raster<Vec3> nrm;
    Raster<Vec2> pe;
    Raster<std::int32_t> instance_id;
    Raster<Vec3> abc;
    Raster<Vec3> obj_nrm;

    ChannelStack() = default;
    ChannelStack(int w, int h, const CameraIntrinsics& cam)
        : width(w),
          height(h),
          camera(cam),
          rgb(w, h, Vec3::Zero()),
          depth(w, h, 0.0),
          valid(w, h, 0),
          plain_uv(w, h, Vec2::Zero()),
          xy(w, h, Vec2::Zero()),
          nrm(w, h, Vec3::Zero()),
          pe(w, h, Vec2::Zero()),
          instance_id(w, h, 0),
          abc(w, h, Vec3::Zero()),
          obj_nrm(w, h, Vec3::Zero()) {}

    double full_u(int j) const { return origin_col + j + 0.5; }
    double full_v(int i) const { return origin_row + i + 0.5; }

    void zero_pixel(int i, int j) {
        rgb.at(i, j).setZero();
        depth.at(i, j) = 0.0;
        valid.at(i, j) = 0;
        plain_uv.at(i, j).setZero();
        xy.at(i, j).setZero();
        nrm.at(i, j).setZero();
        pe.at(i, j).setZero();
        instance_id.at(i, j) = 0;
        abc.at(i, j).setZero();
        obj_nrm.at(i, j).setZero();
    }
};

}  // namespace posebench
