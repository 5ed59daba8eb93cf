#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "posebench/channels.hpp"
#include "posebench/render.hpp"
#include "posebench/rng.hpp"

namespace posebench {

struct EmptyMaskAfterErosion : std::runtime_error {
    EmptyMaskAfterErosion() : std::runtime_error("erosion removed every mask pixel") {}
};

struct AllInvalid : std::runtime_error {
    AllInvalid() : std::runtime_error("patch has no valid depth to fill from") {}
};

struct DegenerateFit : std::runtime_error {
    explicit DegenerateFit(const std::string& why) : std::runtime_error(why) {}
};

struct BBox {
    int row0 = 0, col0 = 0, row1 = 0, col1 = 0;  // half-open

    int rows() const { return row1 - row0; }
    int cols() const { return col1 - col0; }
    bool contains(int i, int j) const {
        return i >= row0 && i < row1 && j >= col0 && j < col1;
    }
};

enum class AnnotationSource { oracle, degraded };

// Detection + segmentation result for one instance. The mask raster covers
// exactly the bbox extent.
struct InstanceAnnotation {
    std::int32_t instance_id = 0;
    BBox bbox;
    MaskRaster mask;
    AnnotationSource source = AnnotationSource::oracle;
    int image_width = 0;
    int image_height = 0;
};

inline void validate_annotation(const InstanceAnnotation& ann) {
    if (ann.instance_id <= 0) throw std::invalid_argument("instance id must be positive");
    if (ann.bbox.row0 < 0 || ann.bbox.col0 < 0 || ann.bbox.row1 > ann.image_height ||
        ann.bbox.col1 > ann.image_width || ann.bbox.rows() <= 0 || ann.bbox.cols() <= 0)
        throw std::invalid_argument("annotation bbox out of image bounds");
    if (!ann.mask.same_shape(ann.bbox.cols(), ann.bbox.rows()))
        throw std::invalid_argument("annotation mask does not match bbox extent");
    if (count_true(ann.mask) == 0) throw std::invalid_argument("annotation mask is empty");
}

// Mask placed on a full-image canvas.
inline MaskRaster annotation_mask_full(const InstanceAnnotation& ann) {
    MaskRaster full(ann.image_width, ann.image_height, 0);
    for (int i = 0; i < ann.mask.height; ++i)
        for (int j = 0; j < ann.mask.width; ++j)
            if (ann.mask.at(i, j)) full.at(ann.bbox.row0 + i, ann.bbox.col0 + j) = 1;
    return full;
}

// Same instance, bbox widened to the whole image. Used when masking is wanted
// without box cropping.
inline InstanceAnnotation with_full_bbox(const InstanceAnnotation& ann) {
    InstanceAnnotation out = ann;
    out.mask = annotation_mask_full(ann);
    out.bbox = {0, 0, ann.image_height, ann.image_width};
    return out;
}

// Ground-truth annotations straight from the instance-id raster: tight bbox,
// exact id-match mask, one annotation per distinct positive id, ordered by id.
inline std::vector<InstanceAnnotation> oracle_annotations(const ChannelStack& stack) {
    std::map<std::int32_t, BBox> boxes;
    for (int i = 0; i < stack.height; ++i)
        for (int j = 0; j < stack.width; ++j) {
            std::int32_t id = stack.instance_id.at(i, j);
            if (id <= 0) continue;
            auto [it, fresh] = boxes.try_emplace(id, BBox{i, j, i + 1, j + 1});
            if (!fresh) {
                it->second.row0 = std::min(it->second.row0, i);
                it->second.col0 = std::min(it->second.col0, j);
                it->second.row1 = std::max(it->second.row1, i + 1);
                it->second.col1 = std::max(it->second.col1, j + 1);
            }
        }
    std::vector<InstanceAnnotation> out;
    for (const auto& [id, box] : boxes) {
        InstanceAnnotation ann;
        ann.instance_id = id;
        ann.bbox = box;
        ann.image_width = stack.width;
        ann.image_height = stack.height;
        ann.mask = MaskRaster(box.cols(), box.rows(), 0);
        for (int i = 0; i < box.rows(); ++i)
            for (int j = 0; j < box.cols(); ++j)
                if (stack.instance_id.at(box.row0 + i, box.col0 + j) == id) ann.mask.at(i, j) = 1;
        out.push_back(std::move(ann));
    }
    return out;
}

enum class MorphMode { dilate, erode };

// Square-kernel binary morphology on the mask; bbox re-tightened afterwards.
// Pixels beyond the image count as background for both operations.
inline InstanceAnnotation degrade_annotation(const InstanceAnnotation& ann, int kernel,
                                             MorphMode mode) {
    if (kernel != 3 && kernel != 5 && kernel != 7)
        throw std::invalid_argument("morphology kernel must be 3, 5 or 7");
    int r = kernel / 2;
    MaskRaster full = annotation_mask_full(ann);
    MaskRaster out(full.width, full.height, 0);
    for (int i = 0; i < full.height; ++i)
        for (int j = 0; j < full.width; ++j) {
            bool hit = (mode == MorphMode::erode);
            for (int di = -r; di <= r && hit == (mode == MorphMode::erode); ++di)
                for (int dj = -r; dj <= r; ++dj) {
                    bool v = full.in_bounds(i + di, j + dj) && full.at(i + di, j + dj);
                    if (mode == MorphMode::dilate && v) {
                        hit = true;
                        break;
                    }
                    if (mode == MorphMode::erode && !v) {
                        hit = false;
                        break;
                    }
                }
            out.at(i, j) = hit ? 1 : 0;
        }

    BBox box{full.height, full.width, 0, 0};
    bool any = false;
    for (int i = 0; i < out.height; ++i)
        for (int j = 0; j < out.width; ++j)
            if (out.at(i, j)) {
                any = true;
                box.row0 = std::min(box.row0, i);
                box.col0 = std::min(box.col0, j);
                box.row1 = std::max(box.row1, i + 1);
                box.col1 = std::max(box.col1, j + 1);
            }
    if (!any) throw EmptyMaskAfterErosion();

    InstanceAnnotation res = ann;
    res.source = AnnotationSource::degraded;
    res.bbox = box;
    res.mask = MaskRaster(box.cols(), box.rows(), 0);
    for (int i = 0; i < box.rows(); ++i)
        for (int j = 0; j < box.cols(); ++j)
            res.mask.at(i, j) = out.at(box.row0 + i, box.col0 + j);
    return res;
}

// Training-style mask degradation: applied with probability 0.75, kernel
// drawn from {3,5,7}, dilate or erode with equal odds. Falls back to the
// original annotation when erosion would empty the mask.
inline InstanceAnnotation random_degrade(const InstanceAnnotation& ann, CounterRng& rng) {
    double p = rng.uniform();
    int kernel = 3 + 2 * int(rng.below(3));
    MorphMode mode = rng.below(2) ? MorphMode::erode : MorphMode::dilate;
    if (p >= 0.75) return ann;
    try {
        return degrade_annotation(ann, kernel, mode);
    } catch (const EmptyMaskAfterErosion&) {
        return ann;
    }
}

// Image-level step 1: crop every channel to the (margin-expanded) box and
// zero everything the segmentation mask rejects. Pixel coordinates are never
// relabeled: plain_uv/pe keep full-image values and the patch records its
// origin. Set apply_mask=false for box-only cropping; mask_pe=false exempts
// the position encoding from masking.
inline ChannelStack crop_and_mask(const ChannelStack& stack, const InstanceAnnotation& ann,
                                  double margin, bool apply_mask = true, bool mask_pe = true) {
    validate_annotation(ann);
    int dr = int(std::lround(margin * ann.bbox.rows() / 2.0));
    int dc = int(std::lround(margin * ann.bbox.cols() / 2.0));
    BBox crop{std::max(0, ann.bbox.row0 - dr), std::max(0, ann.bbox.col0 - dc),
              std::min(stack.height, ann.bbox.row1 + dr),
              std::min(stack.width, ann.bbox.col1 + dc)};

    ChannelStack patch(crop.cols(), crop.rows(), stack.camera);
    patch.origin_row = stack.origin_row + crop.row0;
    patch.origin_col = stack.origin_col + crop.col0;
    for (int i = 0; i < patch.height; ++i)
        for (int j = 0; j < patch.width; ++j) {
            int si = crop.row0 + i, sj = crop.col0 + j;
            patch.rgb.at(i, j) = stack.rgb.at(si, sj);
            patch.depth.at(i, j) = stack.depth.at(si, sj);
            patch.valid.at(i, j) = stack.valid.at(si, sj);
            patch.plain_uv.at(i, j) = stack.plain_uv.at(si, sj);
            patch.xy.at(i, j) = stack.xy.at(si, sj);
            patch.nrm.at(i, j) = stack.nrm.at(si, sj);
            patch.pe.at(i, j) = stack.pe.at(si, sj);
            patch.instance_id.at(i, j) = stack.instance_id.at(si, sj);
            patch.abc.at(i, j) = stack.abc.at(si, sj);
            patch.obj_nrm.at(i, j) = stack.obj_nrm.at(si, sj);
            if (apply_mask) {
                bool in_mask = ann.bbox.contains(si, sj) &&
                               ann.mask.at(si - ann.bbox.row0, sj - ann.bbox.col0);
                if (!in_mask) {
                    Vec2 pe_keep = patch.pe.at(i, j);
                    patch.zero_pixel(i, j);
                    if (!mask_pe) patch.pe.at(i, j) = pe_keep;
                }
            }
        }
    return patch;
}

// Feature-level step-1 stand-in: a box-filter "receptive field" is applied to
// the raw channels FIRST, masking second. Background values inside the window
// radius leak into masked-in features, which is what the image-level order
// avoids. Returned raster keeps full image extent.
inline ChannelStack feature_level_mask(const ChannelStack& stack, const InstanceAnnotation& ann,
                                       int window_radius) {
    if (window_radius < 0) throw std::invalid_argument("window radius must be >= 0");
    MaskRaster mask = annotation_mask_full(ann);
    ChannelStack out = stack;
    if (window_radius > 0) {
        auto box_mean = [&](auto getter, auto setter) {
            for (int i = 0; i < stack.height; ++i)
                for (int j = 0; j < stack.width; ++j) {
                    auto acc = getter(i, j);
                    acc = acc - acc;  // zero of the channel type
                    int n = 0;
                    for (int di = -window_radius; di <= window_radius; ++di)
                        for (int dj = -window_radius; dj <= window_radius; ++dj) {
                            int ii = i + di, jj = j + dj;
                            if (ii < 0 || ii >= stack.height || jj < 0 || jj >= stack.width)
                                continue;
                            acc = acc + getter(ii, jj);
                            ++n;
                        }
                    setter(i, j, acc / double(n));
                }
        };
        box_mean([&](int i, int j) { return stack.rgb.at(i, j); },
                 [&](int i, int j, const Vec3& v) { out.rgb.at(i, j) = v; });
        box_mean([&](int i, int j) { return stack.depth.at(i, j); },
                 [&](int i, int j, double v) { out.depth.at(i, j) = v; });
        box_mean([&](int i, int j) { return stack.plain_uv.at(i, j); },
                 [&](int i, int j, const Vec2& v) { out.plain_uv.at(i, j) = v; });
        box_mean([&](int i, int j) { return stack.xy.at(i, j); },
                 [&](int i, int j, const Vec2& v) { out.xy.at(i, j) = v; });
        box_mean([&](int i, int j) { return stack.nrm.at(i, j); },
                 [&](int i, int j, const Vec3& v) { out.nrm.at(i, j) = v; });
        box_mean([&](int i, int j) { return stack.pe.at(i, j); },
                 [&](int i, int j, const Vec2& v) { out.pe.at(i, j) = v; });
    }
    for (int i = 0; i < stack.height; ++i)
        for (int j = 0; j < stack.width; ++j)
            if (!mask.at(i, j)) out.zero_pixel(i, j);
    return out;
}

namespace detail {

struct FillStep {
    int radius;
    bool diamond;
};

inline std::vector<FillStep> fill_schedule(const std::vector<int>& kernel_sizes) {
    std::vector<FillStep> steps;
    for (int k : kernel_sizes) steps.push_back({k / 2, true});
    for (int k : kernel_sizes) steps.push_back({k / 2, false});
    return steps;
}

}  // namespace detail

// Classical morphological depth completion: max-pool dilation passes write
// into invalid pixels only (diamond kernels first, then full squares, up to
// 10 sweeps), stragglers take the nearest valid depth, and a 3x3 median pass
// smooths the pixels that started out invalid. Originally valid pixels are
// never modified; a hole-free patch passes through bit-identical.
inline ChannelStack fill_holes(const ChannelStack& patch,
                               const std::vector<int>& kernel_sizes = {5, 7, 9}) {
    size_t n_valid = count_true(patch.valid);
    if (n_valid == 0) throw AllInvalid();
    ChannelStack out = patch;
    if (n_valid == patch.valid.size()) return out;

    MaskRaster originally_invalid(patch.width, patch.height, 0);
    for (int i = 0; i < patch.height; ++i)
        for (int j = 0; j < patch.width; ++j)
            originally_invalid.at(i, j) = patch.valid.at(i, j) ? 0 : 1;

    auto steps = detail::fill_schedule(kernel_sizes);
    for (int sweep = 0; sweep < 10; ++sweep) {
        bool remaining = false;
        for (auto v : out.valid.data) remaining |= (v == 0);
        if (!remaining) break;
        for (const auto& step : steps) {
            Raster<double> depth_snap = out.depth;
            MaskRaster valid_snap = out.valid;
            for (int i = 0; i < patch.height; ++i)
                for (int j = 0; j < patch.width; ++j) {
                    if (valid_snap.at(i, j)) continue;
                    double best = -1.0;
                    for (int di = -step.radius; di <= step.radius; ++di)
                        for (int dj = -step.radius; dj <= step.radius; ++dj) {
                            if (step.diamond && std::abs(di) + std::abs(dj) > step.radius)
                                continue;
                            int ii = i + di, jj = j + dj;
                            if (!valid_snap.in_bounds(ii, jj) || !valid_snap.at(ii, jj)) continue;
                            best = std::max(best, depth_snap.at(ii, jj));
                        }
                    if (best >= 0.0) {
                        out.depth.at(i, j) = best;
                        out.valid.at(i, j) = 1;
                    }
                }
        }
    }

    // nearest-valid fallback for pixels no dilation pass reached
    for (int i = 0; i < patch.height; ++i)
        for (int j = 0; j < patch.width; ++j) {
            if (out.valid.at(i, j)) continue;
            long best_d2 = std::numeric_limits<long>::max();
            double best_depth = 0.0;
            for (int ii = 0; ii < patch.height; ++ii)
                for (int jj = 0; jj < patch.width; ++jj) {
                    if (!patch.valid.at(ii, jj)) continue;
                    long d2 = long(ii - i) * (ii - i) + long(jj - j) * (jj - j);
                    if (d2 < best_d2) {
                        best_d2 = d2;
                        best_depth = patch.depth.at(ii, jj);
                    }
                }
            out.depth.at(i, j) = best_depth;
            out.valid.at(i, j) = 1;
        }

    // median smoothing over the pixels that started out invalid; the window
    // draws from originally-valid depths only, so dilated fill values do not
    // feed back into their neighbors
    Raster<double> depth_snap = out.depth;
    for (int i = 0; i < patch.height; ++i)
        for (int j = 0; j < patch.width; ++j) {
            if (!originally_invalid.at(i, j)) continue;
            std::vector<double> window;
            for (int di = -1; di <= 1; ++di)
                for (int dj = -1; dj <= 1; ++dj) {
                    int ii = i + di, jj = j + dj;
                    if (depth_snap.in_bounds(ii, jj) && patch.valid.at(ii, jj))
                        window.push_back(depth_snap.at(ii, jj));
                }
            if (window.empty()) continue;  // deep in a hole: keep the dilated value
            std::sort(window.begin(), window.end());
            out.depth.at(i, j) = window[(window.size() - 1) / 2];
        }
    return out;
}

// Affine depth corrector trained against reprojected noiseless depth.
struct CalibrationModel {
    std::string object_class;
    double alpha = 1.0;
    double beta = 0.0;
    double fit_residual = 0.0;  // RMS, meters

    static CalibrationModel identity(const std::string& cls = "") {
        return {cls, 1.0, 0.0, 0.0};
    }
};

inline void validate_calibration(const CalibrationModel& m) {
    if (!(m.alpha > 0.0 && m.alpha < 10.0))
        throw std::invalid_argument("calibration gain out of range (0, 10)");
    if (m.fit_residual < 0.0) throw std::invalid_argument("negative fit residual");
}

// Streaming least squares for alpha*d + beta ~ d'. Uses Welford-style
// centered co-moments (merged with Chan's formulas), which keeps the residual
// of a near-exact fit at rounding level instead of losing it to cancellation.
// Accumulation order is the call order; the harness feeds pixels in sorted
// (scene, instance, row, col) order so fits are bit-reproducible.
class CalibrationFit {
public:
    void add(double observed, double dprime) {
        ++n_;
        double n = double(n_);
        double dd = observed - mean_d_;
        double dp = dprime - mean_p_;
        mean_d_ += dd / n;
        mean_p_ += dp / n;
        m2_d_ += dd * (observed - mean_d_);
        m2_p_ += dp * (dprime - mean_p_);
        cov_ += dd * (dprime - mean_p_);
        min_d_ = std::min(min_d_, observed);
        max_d_ = std::max(max_d_, observed);
    }

    void add_patch(const Raster<double>& observed, const MaskRaster& valid,
                   const Raster<double>& dprime, const MaskRaster& mask) {
        for (int i = 0; i < observed.height; ++i)
            for (int j = 0; j < observed.width; ++j)
                if (mask.at(i, j) && valid.at(i, j)) add(observed.at(i, j), dprime.at(i, j));
    }

    void merge(const CalibrationFit& o) {
        if (o.n_ == 0) return;
        if (n_ == 0) {
            *this = o;
            return;
        }
        double na = double(n_), nb = double(o.n_), n = na + nb;
        double dd = o.mean_d_ - mean_d_;
        double dp = o.mean_p_ - mean_p_;
        m2_d_ += o.m2_d_ + dd * dd * na * nb / n;
        m2_p_ += o.m2_p_ + dp * dp * na * nb / n;
        cov_ += o.cov_ + dd * dp * na * nb / n;
        mean_d_ += dd * nb / n;
        mean_p_ += dp * nb / n;
        n_ += o.n_;
        min_d_ = std::min(min_d_, o.min_d_);
        max_d_ = std::max(max_d_, o.max_d_);
    }

    std::size_t sample_count() const { return n_; }

    CalibrationModel solve(const std::string& object_class = "") const {
        if (n_ < 2) throw DegenerateFit("need at least two depth samples");
        if (max_d_ - min_d_ < 1e-12)
            throw DegenerateFit("all observed depths equal; normal equations singular");
        double alpha = cov_ / m2_d_;
        double beta = mean_p_ - alpha * mean_d_;
        double sse = std::max(0.0, m2_p_ - alpha * cov_);
        CalibrationModel m{object_class, alpha, beta, std::sqrt(sse / double(n_))};
        validate_calibration(m);
        return m;
    }

private:
    std::size_t n_ = 0;
    double mean_d_ = 0, mean_p_ = 0;
    double m2_d_ = 0, m2_p_ = 0, cov_ = 0;
    double min_d_ = std::numeric_limits<double>::infinity();
    double max_d_ = -std::numeric_limits<double>::infinity();
};

struct CalibrationPatch {
    Raster<double> observed;
    MaskRaster valid;
    Raster<double> dprime;
    MaskRaster mask;
};

inline CalibrationModel fit_calibration(const std::vector<CalibrationPatch>& patches,
                                        const std::string& object_class = "") {
    CalibrationFit fit;
    for (const auto& p : patches) fit.add_patch(p.observed, p.valid, p.dprime, p.mask);
    return fit.solve(object_class);
}

// Applies the affine correction to valid depths and refreshes the channels
// derived from depth.
inline ChannelStack apply_calibration(const ChannelStack& patch, const CalibrationModel& model) {
    validate_calibration(model);
    ChannelStack out = patch;
    for (int i = 0; i < patch.height; ++i)
        for (int j = 0; j < patch.width; ++j) {
            if (!out.valid.at(i, j)) continue;
            double d = std::max(1e-6, model.alpha * out.depth.at(i, j) + model.beta);
            out.depth.at(i, j) = d;
            Vec3 p = backproject(out.camera, out.full_u(j), out.full_v(i), d);
            out.xy.at(i, j) = Vec2(p.x(), p.y());
        }
    out.nrm = compute_normals(out.depth, out.valid, out.camera, out.origin_row, out.origin_col);
    return out;
}

}  // namespace posebench
