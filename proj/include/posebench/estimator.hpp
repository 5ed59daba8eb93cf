#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <stdexcept>
#include <vector>

#include "posebench/channels.hpp"
#include "posebench/metrics.hpp"
#include "posebench/rng.hpp"

namespace posebench {

struct TooFewPoints : std::runtime_error {
    TooFewPoints() : std::runtime_error("fewer than 3 valid instance pixels") {}
};

struct DegenerateConfiguration : std::runtime_error {
    DegenerateConfiguration()
        : std::runtime_error("correspondence points are collinear or coincident") {}
};

// Object-frame points paired with their observed camera-frame positions.
struct Correspondence {
    Vec3 abc;  // object frame
    Vec3 xyd;  // camera frame: (x, y, depth)
};

struct CorrespondenceSet {
    std::vector<Correspondence> pairs;
    std::vector<double> weights;  // empty = uniform
};

// One pair per valid instance pixel of the patch (row-major order), uniformly
// subsampled to at most `subsample` pairs with a partial Fisher-Yates shuffle
// on the given stream.
inline CorrespondenceSet build_correspondences(const ChannelStack& patch, int subsample,
                                               CounterRng rng) {
    CorrespondenceSet set;
    for (int i = 0; i < patch.height; ++i)
        for (int j = 0; j < patch.width; ++j) {
            if (!patch.valid.at(i, j) || patch.instance_id.at(i, j) <= 0) continue;
            const Vec2& xy = patch.xy.at(i, j);
            set.pairs.push_back({patch.abc.at(i, j), Vec3(xy.x(), xy.y(), patch.depth.at(i, j))});
        }
    if (set.pairs.size() < 3) throw TooFewPoints();
    if (subsample > 0 && set.pairs.size() > std::size_t(subsample)) {
        for (int k = 0; k < subsample; ++k) {
            std::size_t j = k + rng.below(set.pairs.size() - k);
            std::swap(set.pairs[k], set.pairs[j]);
        }
        set.pairs.resize(subsample);
    }
    return set;
}

// Closed-form weighted rigid fit (centroid subtraction + SVD of the
// cross-covariance, with the reflection fix). Minimizes
// sum_i w_i |R*abc_i + T - xyd_i|^2.
inline Pose fit_pose(const CorrespondenceSet& set) {
    const auto& pairs = set.pairs;
    if (pairs.size() < 3) throw DegenerateConfiguration();
    if (!set.weights.empty() && set.weights.size() != pairs.size())
        throw std::invalid_argument("weight count does not match pair count");

    double wsum = 0;
    Vec3 src_c = Vec3::Zero(), dst_c = Vec3::Zero();
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        double w = set.weights.empty() ? 1.0 : set.weights[i];
        if (w < 0) throw std::invalid_argument("negative correspondence weight");
        wsum += w;
        src_c += w * pairs[i].abc;
        dst_c += w * pairs[i].xyd;
    }
    if (wsum <= 0) throw DegenerateConfiguration();
    src_c /= wsum;
    dst_c /= wsum;

    Mat3 cov = Mat3::Zero();
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        double w = set.weights.empty() ? 1.0 : set.weights[i];
        cov += w * (pairs[i].abc - src_c) * (pairs[i].xyd - dst_c).transpose();
    }
    Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec3& sv = svd.singularValues();
    if (!(sv(0) > 0) || sv(1) <= sv(0) * 1e-12) throw DegenerateConfiguration();

    Mat3 u = svd.matrixU();
    Mat3 v = svd.matrixV();
    Mat3 d = Mat3::Identity();
    d(2, 2) = (v * u.transpose()).determinant() < 0 ? -1.0 : 1.0;
    Pose pose;
    pose.rotation = nearest_rotation(v * d * u.transpose());
    pose.translation = dst_c - pose.rotation * src_c;
    validate_pose(pose);
    return pose;
}

// Mean vertex displacement between predicted and ground-truth placement.
// Same formula, and same implementation, as metric_add.
inline double loss_rt(const Pose& pred, const Pose& gt, const Mesh& mesh) {
    return metric_add(pred, gt, mesh);
}

// Mean L1 distance between predicted and reference object-frame coordinates
// over the mask.
inline double loss_abc(const Raster<Vec3>& pred_abc, const Raster<Vec3>& gt_abc,
                       const MaskRaster& mask) {
    if (pred_abc.width != gt_abc.width || pred_abc.height != gt_abc.height ||
        mask.width != gt_abc.width || mask.height != gt_abc.height)
        throw std::invalid_argument("raster shapes differ");
    double sum = 0;
    std::size_t n = 0;
    for (int i = 0; i < mask.height; ++i)
        for (int j = 0; j < mask.width; ++j) {
            if (!mask.at(i, j)) continue;
            sum += (pred_abc.at(i, j) - gt_abc.at(i, j)).cwiseAbs().sum();
            ++n;
        }
    if (n == 0) throw EmptyMask();
    return sum / double(n);
}

struct DepthChannels {
    const Raster<double>& depth;
    const Raster<Vec2>& xy;
    const Raster<Vec3>& nrm;
};

// Mean L1 over mask pixels of the six depth-derived terms:
// |d-d'| + |x-x'| + |y-y'| + |nx-nx'| + |ny-ny'| + |nz-nz'|.
// Callers exclude pixels whose normal is undefined from the mask.
inline double loss_depth(const DepthChannels& pred, const DepthChannels& labels,
                         const MaskRaster& mask) {
    if (pred.depth.width != labels.depth.width || pred.depth.height != labels.depth.height ||
        mask.width != pred.depth.width || mask.height != pred.depth.height)
        throw std::invalid_argument("raster shapes differ");
    double sum = 0;
    std::size_t n = 0;
    for (int i = 0; i < mask.height; ++i)
        for (int j = 0; j < mask.width; ++j) {
            if (!mask.at(i, j)) continue;
            sum += std::abs(pred.depth.at(i, j) - labels.depth.at(i, j));
            sum += (pred.xy.at(i, j) - labels.xy.at(i, j)).cwiseAbs().sum();
            sum += (pred.nrm.at(i, j) - labels.nrm.at(i, j)).cwiseAbs().sum();
            ++n;
        }
    if (n == 0) throw EmptyMask();
    return sum / double(n);
}

struct LossWeights {
    double lambda0 = 1.0;
    double lambda1 = 1.0;
    double lambda2 = 1.0;
};

// Published lambda0 schedules, exposed as presets. Epochs are 1-based;
// lambda1 and lambda2 stay at 1.
inline LossWeights loss_weights_main_text(int epoch) {
    double l0 = epoch < 20 ? 1.0 : epoch < 30 ? 5.0 : epoch < 38 ? 20.0 : 50.0;
    return {l0, 1.0, 1.0};
}

inline LossWeights loss_weights_supplement(int epoch) {
    double l0 = epoch <= 15 ? 1.0 : epoch <= 25 ? 5.0 : epoch <= 35 ? 10.0 : 20.0;
    return {l0, 1.0, 1.0};
}

inline double loss_total(double lrt, double labc, double ldepth, const LossWeights& w) {
    if (!(w.lambda0 >= 0 && w.lambda1 >= 0 && w.lambda2 >= 0))
        throw std::invalid_argument("loss weights must be nonnegative");
    return w.lambda0 * lrt + w.lambda1 * labc + w.lambda2 * ldepth;
}

}  // namespace posebench
