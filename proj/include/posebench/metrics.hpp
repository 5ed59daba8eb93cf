#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "posebench/geometry.hpp"
#include "posebench/mesh.hpp"
#include "posebench/raster.hpp"

namespace posebench {

struct EmptyInput : std::runtime_error {
    EmptyInput() : std::runtime_error("metric input is empty") {}
};

// Exact nearest-neighbor index over a 3D point set (median-split k-d tree
// with branch-and-bound queries). Holds the ground-truth-transformed model
// vertices for the closest-point metric.
class NearestNeighborIndex {
public:
    explicit NearestNeighborIndex(std::vector<Vec3> points) : points_(std::move(points)) {
        if (points_.empty()) throw EmptyInput();
        order_.resize(points_.size());
        std::iota(order_.begin(), order_.end(), 0);
        nodes_.reserve(points_.size());
        root_ = build(0, int(points_.size()));
    }

    // Squared distance to the closest stored point.
    double nearest_sq(const Vec3& q) const {
        double best = std::numeric_limits<double>::infinity();
        search(root_, q, best);
        return best;
    }

    double nearest(const Vec3& q) const { return std::sqrt(nearest_sq(q)); }

    const std::vector<Vec3>& points() const { return points_; }

private:
    struct Node {
        int begin, end;       // leaf range in order_
        int axis = -1;        // -1 marks a leaf
        double split = 0;
        int left = -1, right = -1;
    };

    static constexpr int kLeafSize = 8;

    int build(int begin, int end) {
        Node node;
        node.begin = begin;
        node.end = end;
        if (end - begin > kLeafSize) {
            Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
            Vec3 hi = -lo;
            for (int k = begin; k < end; ++k) {
                lo = lo.cwiseMin(points_[order_[k]]);
                hi = hi.cwiseMax(points_[order_[k]]);
            }
            Vec3 extent = hi - lo;
            int axis = 0;
            if (extent.y() > extent.x()) axis = 1;
            if (extent.z() > extent[axis]) axis = 2;
            if (extent[axis] > 0) {
                int mid = (begin + end) / 2;
                std::nth_element(order_.begin() + begin, order_.begin() + mid,
                                 order_.begin() + end, [&](int a, int b) {
                                     return points_[a][axis] < points_[b][axis];
                                 });
                node.axis = axis;
                node.split = points_[order_[mid]][axis];
                int self = int(nodes_.size());
                nodes_.push_back(node);
                int left = build(begin, mid);
                int right = build(mid, end);
                nodes_[self].left = left;
                nodes_[self].right = right;
                return self;
            }
        }
        nodes_.push_back(node);
        return int(nodes_.size()) - 1;
    }

    void search(int idx, const Vec3& q, double& best) const {
        const Node& node = nodes_[idx];
        if (node.axis < 0) {
            for (int k = node.begin; k < node.end; ++k)
                best = std::min(best, (points_[order_[k]] - q).squaredNorm());
            return;
        }
        double delta = q[node.axis] - node.split;
        int near = delta < 0 ? node.left : node.right;
        int far = delta < 0 ? node.right : node.left;
        search(near, q, best);
        if (delta * delta < best) search(far, q, best);
    }

    std::vector<Vec3> points_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
    int root_ = 0;
};

inline std::vector<Vec3> transformed_vertices(const Mesh& mesh, const Pose& pose) {
    std::vector<Vec3> out;
    out.reserve(mesh.vertices.size());
    for (const auto& v : mesh.vertices) out.push_back(apply_pose(pose, v));
    return out;
}

// Mean per-vertex distance between the two transformed models.
inline double metric_add(const Pose& pred, const Pose& gt, const Mesh& mesh) {
    if (mesh.vertices.empty()) throw EmptyInput();
    double sum = 0;
    for (const auto& v : mesh.vertices) sum += (apply_pose(pred, v) - apply_pose(gt, v)).norm();
    return sum / double(mesh.vertices.size());
}

// Closest-point variant for symmetric objects: each predicted vertex matches
// the nearest ground-truth-transformed vertex. The inner minimum runs over
// the same vertex set as the outer sum. max_vertices > 0 evaluates a
// deterministic stride subsample of that set (off by default).
inline double metric_adds(const Pose& pred, const Pose& gt, const Mesh& mesh,
                          std::size_t max_vertices = 0) {
    if (mesh.vertices.empty()) throw EmptyInput();
    std::vector<Vec3> verts = mesh.vertices;
    if (max_vertices >= 3 && verts.size() > max_vertices) {
        std::vector<Vec3> kept;
        kept.reserve(max_vertices);
        double stride = double(verts.size()) / double(max_vertices);
        for (std::size_t k = 0; k < max_vertices; ++k) kept.push_back(verts[size_t(k * stride)]);
        verts = std::move(kept);
    }
    std::vector<Vec3> gt_pts;
    gt_pts.reserve(verts.size());
    for (const auto& v : verts) gt_pts.push_back(apply_pose(gt, v));
    NearestNeighborIndex index(std::move(gt_pts));
    double sum = 0;
    for (const auto& v : verts) sum += index.nearest(apply_pose(pred, v));
    return sum / double(verts.size());
}

inline double metric_add_s_selector(const Pose& pred, const Pose& gt, const Mesh& mesh) {
    return mesh.symmetric ? metric_adds(pred, gt, mesh) : metric_add(pred, gt, mesh);
}

// Area under the accuracy-threshold curve, in percent. accuracy(tau) is the
// fraction of errors strictly below tau; the integral over [0, tau_max] has
// the closed form mean(max(0, tau_max - e)) / tau_max.
inline double auc(const std::vector<double>& errors, double tau_max = 0.1) {
    if (errors.empty()) throw EmptyInput();
    if (!(tau_max > 0)) throw std::invalid_argument("tau_max must be positive");
    double sum = 0;
    for (double e : errors) sum += std::max(0.0, tau_max - std::min(e, tau_max));
    return 100.0 * sum / (double(errors.size()) * tau_max);
}

// Fraction (percent) of errors strictly below `fraction` of each object's
// diameter. Boundary hits count as failures.
inline double acc_threshold(const std::vector<double>& errors,
                            const std::vector<double>& diameters, double fraction = 0.1) {
    if (errors.empty()) throw EmptyInput();
    if (errors.size() != diameters.size())
        throw std::invalid_argument("errors and diameters differ in length");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < errors.size(); ++i) {
        if (!(diameters[i] > 0)) throw std::invalid_argument("diameters must be positive");
        if (errors[i] < fraction * diameters[i]) ++hits;
    }
    return 100.0 * double(hits) / double(errors.size());
}

// Mean intersection-over-union over paired masks. A pair with an empty union
// counts as a perfect match.
inline double miou(const std::vector<MaskRaster>& pred, const std::vector<MaskRaster>& gt) {
    if (pred.size() != gt.size()) throw std::invalid_argument("mask lists differ in length");
    if (pred.empty()) return 1.0;
    double sum = 0;
    for (std::size_t k = 0; k < pred.size(); ++k) {
        if (pred[k].width != gt[k].width || pred[k].height != gt[k].height)
            throw std::invalid_argument("mask shapes differ");
        std::size_t inter = 0, uni = 0;
        for (std::size_t p = 0; p < pred[k].data.size(); ++p) {
            bool a = pred[k].data[p] != 0, b = gt[k].data[p] != 0;
            inter += (a && b);
            uni += (a || b);
        }
        sum += uni == 0 ? 1.0 : double(inter) / double(uni);
    }
    return sum / double(pred.size());
}

struct InstanceMetrics {
    int scene = 0;
    int instance = 0;
    std::string object_class;
    double add = 0;
    double adds = 0;
    bool add_s_used = false;  // true when the closest-point metric was selected
    double diameter = 0;
};

struct ReportRow {
    std::string label;
    std::size_t count = 0;
    double auc_adds = 0;    // AUC of the closest-point errors
    double auc_add_s = 0;   // AUC of the symmetry-selected errors
    double acc_0_1d = 0;    // selected error < 0.1 * diameter, percent
};

// Per-class rows plus two overall rows: "Avg" averages the class rows
// (class-weighted, the default reading of per-class tables) and
// "Avg_instances" pools every instance.
struct MetricReport {
    std::vector<InstanceMetrics> per_instance;
    std::vector<ReportRow> per_class;
    ReportRow avg_class_weighted;
    ReportRow avg_instance_weighted;
    double tau_max = 0.1;
};

namespace detail {

inline ReportRow make_row(const std::string& label,
                          const std::vector<const InstanceMetrics*>& items, double tau_max) {
    ReportRow row;
    row.label = label;
    row.count = items.size();
    std::vector<double> adds_err, sel_err, diam;
    for (const auto* m : items) {
        adds_err.push_back(m->adds);
        sel_err.push_back(m->add_s_used ? m->adds : m->add);
        diam.push_back(m->diameter);
    }
    row.auc_adds = auc(adds_err, tau_max);
    row.auc_add_s = auc(sel_err, tau_max);
    row.acc_0_1d = acc_threshold(sel_err, diam, 0.1);
    return row;
}

}  // namespace detail

inline MetricReport aggregate_report(const std::vector<InstanceMetrics>& per_instance,
                                     double tau_max = 0.1) {
    if (per_instance.empty()) throw EmptyInput();
    MetricReport report;
    report.per_instance = per_instance;
    report.tau_max = tau_max;

    std::map<std::string, std::vector<const InstanceMetrics*>> by_class;
    std::vector<const InstanceMetrics*> all;
    for (const auto& m : report.per_instance) {
        by_class[m.object_class].push_back(&m);
        all.push_back(&m);
    }
    for (const auto& [cls, items] : by_class)
        report.per_class.push_back(detail::make_row(cls, items, tau_max));

    report.avg_instance_weighted = detail::make_row("Avg_instances", all, tau_max);
    ReportRow avg;
    avg.label = "Avg";
    avg.count = all.size();
    for (const auto& row : report.per_class) {
        avg.auc_adds += row.auc_adds;
        avg.auc_add_s += row.auc_add_s;
        avg.acc_0_1d += row.acc_0_1d;
    }
    double k = double(report.per_class.size());
    avg.auc_adds /= k;
    avg.auc_add_s /= k;
    avg.acc_0_1d /= k;
    report.avg_class_weighted = avg;
    return report;
}

}  // namespace posebench
