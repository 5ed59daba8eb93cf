#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "posebench/geometry.hpp"

namespace posebench {

// Triangle mesh in its object frame. `symmetric` marks shapes whose vertex
// set is (approximately) preserved by some rigid self-map, which switches the
// closest-point metric on for them downstream.
struct Mesh {
    std::string name;
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;
    bool symmetric = false;

    bool indices_valid() const {
        for (const auto& t : triangles)
            for (int idx : t)
                if (idx < 0 || idx >= int(vertices.size())) return false;
        return true;
    }
};

// Max pairwise vertex distance. Quadratic scan; meshes here stay small.
inline double mesh_diameter(const Mesh& m) {
    double best = 0.0;
    for (size_t a = 0; a < m.vertices.size(); ++a)
        for (size_t b = a + 1; b < m.vertices.size(); ++b)
            best = std::max(best, (m.vertices[a] - m.vertices[b]).norm());
    return best;
}

inline void mesh_bounds(const Mesh& m, Vec3& lo, Vec3& hi) {
    lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    hi = -lo;
    for (const auto& v : m.vertices) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
}

inline Vec3 triangle_normal(const Mesh& m, int tri) {
    const auto& t = m.triangles[tri];
    Vec3 n = (m.vertices[t[1]] - m.vertices[t[0]]).cross(m.vertices[t[2]] - m.vertices[t[0]]);
    double len = n.norm();
    return len > 0 ? Vec3(n / len) : Vec3::Zero();
}

inline void validate_mesh(const Mesh& m) {
    if (m.vertices.empty() || m.triangles.empty())
        throw std::invalid_argument("mesh '" + m.name + "' is empty");
    if (!m.indices_valid())
        throw std::invalid_argument("mesh '" + m.name + "' has out-of-range triangle indices");
    if (!(mesh_diameter(m) > 0))
        throw std::invalid_argument("mesh '" + m.name + "' has zero diameter");
}

namespace detail {

// Appends a subdivided quad patch: origin + s*du + t*dv, (s,t) in [0,1]^2,
// winding chosen so the normal is du x dv.
inline void append_patch(Mesh& m, const Vec3& origin, const Vec3& du, const Vec3& dv, int n) {
    int base = int(m.vertices.size());
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j)
            m.vertices.push_back(origin + du * (double(j) / n) + dv * (double(i) / n));
    auto vid = [&](int i, int j) { return base + i * (n + 1) + j; };
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            m.triangles.push_back({vid(i, j), vid(i, j + 1), vid(i + 1, j + 1)});
            m.triangles.push_back({vid(i, j), vid(i + 1, j + 1), vid(i + 1, j)});
        }
}

inline void append_box(Mesh& m, const Vec3& lo, const Vec3& hi, int n) {
    Vec3 d = hi - lo;
    Vec3 ex(d.x(), 0, 0), ey(0, d.y(), 0), ez(0, 0, d.z());
    append_patch(m, lo, ey, ex, n);                          // bottom, normal -z
    append_patch(m, Vec3(lo.x(), lo.y(), hi.z()), ex, ey, n);  // top, normal +z
    append_patch(m, lo, ex, ez, n);                          // front, normal -y
    append_patch(m, Vec3(lo.x(), hi.y(), lo.z()), ez, ex, n);  // back, normal +y
    append_patch(m, lo, ez, ey, n);                          // left, normal -x
    append_patch(m, Vec3(hi.x(), lo.y(), lo.z()), ey, ez, n);  // right, normal +x
}

}  // namespace detail

// Axis-aligned box centered at the origin, each face an n x n grid.
inline Mesh make_box(const std::string& name, const Vec3& size, int subdiv = 4) {
    Mesh m;
    m.name = name;
    detail::append_box(m, -size / 2, size / 2, std::max(1, subdiv));
    return m;
}

// Open-ended lathe helper: revolve a profile (r_k, z_k) around +z.
inline Mesh make_lathe(const std::string& name, const std::vector<Vec2>& profile, int segments,
                       bool symmetric) {
    Mesh m;
    m.name = name;
    m.symmetric = symmetric;
    int rings = int(profile.size());
    for (int k = 0; k < rings; ++k) {
        for (int s = 0; s < segments; ++s) {
            double a = 2.0 * M_PI * s / segments;
            m.vertices.push_back(
                {profile[k].x() * std::cos(a), profile[k].x() * std::sin(a), profile[k].y()});
        }
    }
    auto vid = [&](int k, int s) { return k * segments + (s % segments); };
    for (int k = 0; k + 1 < rings; ++k)
        for (int s = 0; s < segments; ++s) {
            m.triangles.push_back({vid(k, s), vid(k, s + 1), vid(k + 1, s + 1)});
            m.triangles.push_back({vid(k, s), vid(k + 1, s + 1), vid(k + 1, s)});
        }
    return m;
}

// Closed cylinder of revolution about +z, centered at the origin.
inline Mesh make_cylinder(const std::string& name, double radius, double height,
                          int segments = 40, int rings = 5) {
    std::vector<Vec2> profile;
    profile.push_back({1e-9, -height / 2});  // bottom apex (degenerate ring)
    profile.push_back({radius, -height / 2});
    for (int k = 0; k <= rings; ++k)
        profile.push_back({radius, -height / 2 + height * double(k) / rings});
    profile.push_back({radius, height / 2});
    profile.push_back({1e-9, height / 2});  // top apex
    return make_lathe(name, profile, segments, true);
}

// Cylinder body with hemispherical caps (a "can"), axis +z.
inline Mesh make_capped_can(const std::string& name, double radius, double body_height,
                            int segments = 36, int cap_rings = 5) {
    std::vector<Vec2> profile;
    double h = body_height / 2;
    for (int k = 0; k <= cap_rings; ++k) {
        double a = -M_PI / 2 + (M_PI / 2) * double(k) / cap_rings;
        profile.push_back({std::max(1e-9, radius * std::cos(a)), -h + radius * std::sin(a)});
    }
    for (int k = 1; k <= cap_rings; ++k) {
        double a = (M_PI / 2) * double(k) / cap_rings;
        profile.push_back({std::max(1e-9, radius * std::cos(a)), h + radius * std::sin(a)});
    }
    return make_lathe(name, profile, segments, true);
}

// Two fused boxes forming an L. Deliberately asymmetric.
inline Mesh make_l_bracket(const std::string& name, double leg = 0.1, double width = 0.04,
                           double thickness = 0.025, int subdiv = 3) {
    Mesh m;
    m.name = name;
    detail::append_box(m, Vec3(-leg / 2, -width / 2, 0), Vec3(leg / 2, width / 2, thickness),
                       subdiv);
    detail::append_box(m, Vec3(-leg / 2, -width / 2, thickness),
                       Vec3(-leg / 2 + thickness, width / 2, leg * 0.8), subdiv);
    return m;
}

// Flat square {(+-s, +-s, 0)}: 4 vertices, 2 triangles, 4-fold symmetric.
inline Mesh make_square_plate(const std::string& name, double s) {
    Mesh m;
    m.name = name;
    m.symmetric = true;
    m.vertices = {{-s, -s, 0}, {s, -s, 0}, {s, s, 0}, {-s, s, 0}};
    m.triangles = {{0, 1, 2}, {0, 2, 3}};
    return m;
}

// ASCII PLY, minimal subset: float/double vertex x y z properties and
// 3-index faces. Anything else in the header is rejected.
inline Mesh load_ply(const std::string& path, const std::string& name = "",
                     bool symmetric = false) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open PLY file: " + path);
    std::string line;
    std::getline(in, line);
    if (line != "ply") throw std::runtime_error(path + ": not a PLY file");
    size_t n_vertices = 0, n_faces = 0;
    bool ascii = false;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "format") {
            std::string fmt;
            ls >> fmt;
            ascii = (fmt == "ascii");
        } else if (tok == "element") {
            std::string what;
            size_t n;
            ls >> what >> n;
            if (what == "vertex") n_vertices = n;
            else if (what == "face") n_faces = n;
            else throw std::runtime_error(path + ": unsupported element " + what);
        } else if (tok == "end_header") {
            break;
        } else if (tok != "property" && tok != "comment") {
            throw std::runtime_error(path + ": unsupported header line: " + line);
        }
    }
    if (!ascii) throw std::runtime_error(path + ": only ascii PLY is supported");
    Mesh m;
    m.name = name.empty() ? path : name;
    m.symmetric = symmetric;
    m.vertices.reserve(n_vertices);
    for (size_t i = 0; i < n_vertices; ++i) {
        double x, y, z;
        if (!(in >> x >> y >> z)) throw std::runtime_error(path + ": truncated vertex list");
        m.vertices.push_back({x, y, z});
    }
    m.triangles.reserve(n_faces);
    for (size_t i = 0; i < n_faces; ++i) {
        int n, a, b, c;
        if (!(in >> n >> a >> b >> c) || n != 3)
            throw std::runtime_error(path + ": only triangle faces are supported");
        m.triangles.push_back({a, b, c});
    }
    validate_mesh(m);
    return m;
}

inline void save_ply(const Mesh& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write PLY file: " + path);
    out << "ply\nformat ascii 1.0\n";
    out << "element vertex " << m.vertices.size() << "\n";
    out << "property double x\nproperty double y\nproperty double z\n";
    out << "element face " << m.triangles.size() << "\n";
    out << "property list uchar int vertex_indices\nend_header\n";
    out.precision(17);
    for (const auto& v : m.vertices) out << v.x() << " " << v.y() << " " << v.z() << "\n";
    for (const auto& t : m.triangles) out << "3 " << t[0] << " " << t[1] << " " << t[2] << "\n";
}

}  // namespace posebench
