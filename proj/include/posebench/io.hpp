#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "posebench/channels.hpp"
#include "posebench/noise.hpp"
#include "posebench/pipeline.hpp"

namespace posebench {

using json = nlohmann::json;

namespace detail {

inline const std::vector<std::string>& plane_names() {
    static const std::vector<std::string> names = {
        "r",   "g",   "b",  "depth", "valid", "u",     "v",     "x",     "y",   "nx",
        "ny",  "nz",  "pe0", "pe1",  "id",    "abc_a", "abc_b", "abc_c", "onx", "ony",
        "onz"};
    return names;
}

inline void gather_planes(const ChannelStack& s, std::vector<std::vector<float>>& planes) {
    size_t n = s.depth.size();
    planes.assign(plane_names().size(), std::vector<float>(n));
    for (size_t p = 0; p < n; ++p) {
        const Vec3& rgb = s.rgb.data[p];
        const Vec2& uv = s.plain_uv.data[p];
        const Vec2& xy = s.xy.data[p];
        const Vec3& nrm = s.nrm.data[p];
        const Vec2& pe = s.pe.data[p];
        const Vec3& abc = s.abc.data[p];
        const Vec3& onrm = s.obj_nrm.data[p];
        int k = 0;
        planes[k++][p] = float(rgb.x());
        planes[k++][p] = float(rgb.y());
        planes[k++][p] = float(rgb.z());
        planes[k++][p] = float(s.depth.data[p]);
        planes[k++][p] = float(s.valid.data[p]);
        planes[k++][p] = float(uv.x());
        planes[k++][p] = float(uv.y());
        planes[k++][p] = float(xy.x());
        planes[k++][p] = float(xy.y());
        planes[k++][p] = float(nrm.x());
        planes[k++][p] = float(nrm.y());
        planes[k++][p] = float(nrm.z());
        planes[k++][p] = float(pe.x());
        planes[k++][p] = float(pe.y());
        planes[k++][p] = float(s.instance_id.data[p]);
        planes[k++][p] = float(abc.x());
        planes[k++][p] = float(abc.y());
        planes[k++][p] = float(abc.z());
        planes[k++][p] = float(onrm.x());
        planes[k++][p] = float(onrm.y());
        planes[k++][p] = float(onrm.z());
    }
}

inline void scatter_planes(ChannelStack& s, const std::vector<std::vector<float>>& planes) {
    size_t n = s.depth.size();
    for (size_t p = 0; p < n; ++p) {
        int k = 0;
        s.rgb.data[p] = Vec3(planes[k][p], planes[k + 1][p], planes[k + 2][p]);
        k += 3;
        s.depth.data[p] = planes[k++][p];
        s.valid.data[p] = planes[k++][p] != 0.0f ? 1 : 0;
        s.plain_uv.data[p] = Vec2(planes[k][p], planes[k + 1][p]);
        k += 2;
        s.xy.data[p] = Vec2(planes[k][p], planes[k + 1][p]);
        k += 2;
        s.nrm.data[p] = Vec3(planes[k][p], planes[k + 1][p], planes[k + 2][p]);
        k += 3;
        s.pe.data[p] = Vec2(planes[k][p], planes[k + 1][p]);
        k += 2;
        s.instance_id.data[p] = std::int32_t(planes[k++][p]);
        s.abc.data[p] = Vec3(planes[k][p], planes[k + 1][p], planes[k + 2][p]);
        k += 3;
        s.obj_nrm.data[p] = Vec3(planes[k][p], planes[k + 1][p], planes[k + 2][p]);
    }
}

}  // namespace detail

inline json camera_to_json(const CameraIntrinsics& c) {
    return {{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx},
            {"cy", c.cy}, {"width", c.width}, {"height", c.height}};
}

inline CameraIntrinsics camera_from_json(const json& j) {
    CameraIntrinsics c;
    c.fx = j.at("fx");
    c.fy = j.at("fy");
    c.cx = j.at("cx");
    c.cy = j.at("cy");
    c.width = j.at("width");
    c.height = j.at("height");
    return c;
}

inline json pose_to_json(const Pose& p) {
    std::vector<double> r(9);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r[i * 3 + j] = p.rotation(i, j);
    return {{"R", r}, {"T", {p.translation.x(), p.translation.y(), p.translation.z()}}};
}

inline Pose pose_from_json(const json& j) {
    Pose p;
    const auto& r = j.at("R");
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) p.rotation(i, k) = r.at(i * 3 + k);
    const auto& t = j.at("T");
    p.translation = Vec3(t.at(0), t.at(1), t.at(2));
    return p;
}

// Channel bundle on disk: one raw file of little-endian float32 planes, in
// sidecar order, plus the sidecar itself. Raw floats round-trip exactly; the
// doubles in memory are truncated to float32 by design of the format.
inline void save_channel_stack(const ChannelStack& s, const std::string& raw_path,
                               const std::string& sidecar_path) {
    std::vector<std::vector<float>> planes;
    detail::gather_planes(s, planes);
    std::ofstream raw(raw_path, std::ios::binary);
    if (!raw) throw std::runtime_error("cannot write " + raw_path);
    for (const auto& plane : planes)
        raw.write(reinterpret_cast<const char*>(plane.data()),
                  std::streamsize(plane.size() * sizeof(float)));
    json side = {{"width", s.width},
                 {"height", s.height},
                 {"channels", planes.size()},
                 {"names", detail::plane_names()},
                 {"camera", camera_to_json(s.camera)},
                 {"origin", {s.origin_row, s.origin_col}}};
    std::ofstream sc(sidecar_path);
    if (!sc) throw std::runtime_error("cannot write " + sidecar_path);
    sc << side.dump(2) << "\n";
}

inline ChannelStack load_channel_stack(const std::string& raw_path,
                                       const std::string& sidecar_path) {
    std::ifstream sc(sidecar_path);
    if (!sc) throw std::runtime_error("cannot open " + sidecar_path);
    json side = json::parse(sc);
    int w = side.at("width"), h = side.at("height");
    size_t channels = side.at("channels");
    if (channels != detail::plane_names().size())
        throw std::runtime_error(sidecar_path + ": unexpected channel count");
    ChannelStack s(w, h, camera_from_json(side.at("camera")));
    if (side.contains("origin")) {
        s.origin_row = side.at("origin").at(0);
        s.origin_col = side.at("origin").at(1);
    }
    std::ifstream raw(raw_path, std::ios::binary);
    if (!raw) throw std::runtime_error("cannot open " + raw_path);
    std::vector<std::vector<float>> planes(channels, std::vector<float>(size_t(w) * h));
    for (auto& plane : planes) {
        raw.read(reinterpret_cast<char*>(plane.data()),
                 std::streamsize(plane.size() * sizeof(float)));
        if (!raw) throw std::runtime_error(raw_path + ": truncated raster file");
    }
    detail::scatter_planes(s, planes);
    return s;
}

// Depth visualization: 16-bit binary PGM in 0.1 mm units, clamped to the
// representable range.
inline void save_depth_pgm(const Raster<double>& depth, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "P5\n" << depth.width << " " << depth.height << "\n65535\n";
    for (int i = 0; i < depth.height; ++i)
        for (int j = 0; j < depth.width; ++j) {
            double mm10 = std::round(depth.at(i, j) * 10000.0);
            unsigned v = unsigned(std::min(65535.0, std::max(0.0, mm10)));
            unsigned char hi = (v >> 8) & 0xff, lo = v & 0xff;
            out.put(char(hi)).put(char(lo));
        }
}

// Run-length encoding of an annotation mask: alternating zero/one run counts
// over the row-major bbox extent, starting with zeros.
inline json annotation_to_json(const InstanceAnnotation& ann) {
    std::vector<std::size_t> runs;
    std::uint8_t current = 0;
    std::size_t len = 0;
    for (auto v : ann.mask.data) {
        std::uint8_t bit = v ? 1 : 0;
        if (bit == current) {
            ++len;
        } else {
            runs.push_back(len);
            current = bit;
            len = 1;
        }
    }
    runs.push_back(len);
    return {{"instance_id", ann.instance_id},
            {"bbox", {ann.bbox.row0, ann.bbox.col0, ann.bbox.row1, ann.bbox.col1}},
            {"image_size", {ann.image_height, ann.image_width}},
            {"source", ann.source == AnnotationSource::oracle ? "oracle" : "degraded"},
            {"rle", runs}};
}

inline InstanceAnnotation annotation_from_json(const json& j) {
    InstanceAnnotation ann;
    ann.instance_id = j.at("instance_id");
    const auto& b = j.at("bbox");
    ann.bbox = {b.at(0), b.at(1), b.at(2), b.at(3)};
    ann.image_height = j.at("image_size").at(0);
    ann.image_width = j.at("image_size").at(1);
    ann.source = j.at("source") == "oracle" ? AnnotationSource::oracle
                                            : AnnotationSource::degraded;
    ann.mask = MaskRaster(ann.bbox.cols(), ann.bbox.rows(), 0);
    std::uint8_t current = 0;
    std::size_t pos = 0;
    for (std::size_t run : j.at("rle").get<std::vector<std::size_t>>()) {
        for (std::size_t k = 0; k < run; ++k, ++pos) {
            if (pos >= ann.mask.data.size())
                throw std::runtime_error("RLE runs exceed mask extent");
            ann.mask.data[pos] = current;
        }
        current = current ? 0 : 1;
    }
    if (pos != ann.mask.data.size()) throw std::runtime_error("RLE runs shorter than mask");
    validate_annotation(ann);
    return ann;
}

inline json calibration_to_json(const CalibrationModel& m) {
    return {{"class", m.object_class},
            {"alpha", m.alpha},
            {"beta", m.beta},
            {"fit_residual", m.fit_residual}};
}

inline CalibrationModel calibration_from_json(const json& j) {
    CalibrationModel m{j.at("class"), j.at("alpha"), j.at("beta"), j.at("fit_residual")};
    validate_calibration(m);
    return m;
}

inline json noise_spec_to_json(const NoiseSpec& n) {
    return {{"hole_rate", n.hole_rate},
            {"hole_blob_radius", n.hole_blob_radius},
            {"gaussian_sigma", n.gaussian_sigma},
            {"quantization_step", n.quantization_step},
            {"clutter_count", n.clutter_count},
            {"seed", n.seed}};
}

inline void write_histogram_csv(const std::vector<HistogramBin>& bins, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "bin_low,bin_high,count\n";
    char line[128];
    for (const auto& b : bins) {
        std::snprintf(line, sizeof line, "%.9f,%.9f,%zu\n", b.lo, b.hi, b.count);
        out << line;
    }
}

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

inline void write_text_file(const std::string& path, const std::string& contents) {
    std::filesystem::create_directories(std::filesystem::path(path).parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << contents;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace posebench
