#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "posebench/channels.hpp"
#include "posebench/rng.hpp"

namespace posebench {

// Sensor corruption parameters. All magnitudes in meters/pixels; everything
// is driven by `seed` so a corpus re-corrupts identically.
struct NoiseSpec {
    double hole_rate = 0.0;        // per-pixel dropout seed probability, [0,1]
    int hole_blob_radius = 0;      // each seed dilates to a disc of this radius
    double gaussian_sigma = 0.0;   // additive depth noise, meters
    double quantization_step = 0.0;  // depth rounding step, meters; 0 = off
    int clutter_count = 0;         // background clutter boxes per scene
    std::uint64_t seed = 0;

    bool is_valid() const {
        return hole_rate >= 0.0 && hole_rate <= 1.0 && hole_blob_radius >= 0 &&
               gaussian_sigma >= 0.0 && quantization_step >= 0.0 && clutter_count >= 0;
    }
};

namespace detail {
constexpr std::uint64_t kHoleStreamTag = 0x401e5;
constexpr std::uint64_t kDepthStreamTag = 0xdee9;
}  // namespace detail

// Depth dropouts: Bernoulli seeds over all valid pixels, each dilated to a
// disc. Affected pixels lose validity and get the 0.0 depth sentinel; no
// other channel is touched. One uniform draw per pixel regardless of
// validity, so the stream stays aligned for any input.
inline ChannelStack inject_holes(const ChannelStack& stack, const NoiseSpec& spec) {
    ChannelStack out = stack;
    if (spec.hole_rate <= 0.0) return out;
    CounterRng rng = CounterRng::for_substream(spec.seed, detail::kHoleStreamTag);
    MaskRaster seeds(stack.width, stack.height, 0);
    for (int i = 0; i < stack.height; ++i)
        for (int j = 0; j < stack.width; ++j) {
            double u = rng.uniform();
            if (stack.valid.at(i, j) && u < spec.hole_rate) seeds.at(i, j) = 1;
        }
    int r = spec.hole_blob_radius;
    for (int i = 0; i < stack.height; ++i)
        for (int j = 0; j < stack.width; ++j) {
            if (!seeds.at(i, j)) continue;
            for (int di = -r; di <= r; ++di)
                for (int dj = -r; dj <= r; ++dj) {
                    if (di * di + dj * dj > r * r) continue;
                    int ii = i + di, jj = j + dj;
                    if (!out.valid.in_bounds(ii, jj)) continue;
                    out.valid.at(ii, jj) = 0;
                    out.depth.at(ii, jj) = 0.0;
                }
        }
    return out;
}

// Additive Gaussian depth error plus optional quantization. Only the depth
// channel changes; derived channels are refreshed later by assemble_channels
// so they end up carrying the corrupted geometry, like sensor output would.
inline ChannelStack inject_depth_error(const ChannelStack& stack, const NoiseSpec& spec) {
    ChannelStack out = stack;
    if (spec.gaussian_sigma <= 0.0 && spec.quantization_step <= 0.0) return out;
    CounterRng rng = CounterRng::for_substream(spec.seed, detail::kDepthStreamTag);
    for (int i = 0; i < stack.height; ++i)
        for (int j = 0; j < stack.width; ++j) {
            double n = rng.normal();  // drawn for every pixel: keeps alignment
            if (!stack.valid.at(i, j)) continue;
            double d = stack.depth.at(i, j) + spec.gaussian_sigma * n;
            if (spec.quantization_step > 0.0)
                d = std::round(d / spec.quantization_step) * spec.quantization_step;
            double min_pos = spec.quantization_step > 0.0 ? spec.quantization_step : 1e-6;
            out.depth.at(i, j) = std::max(d, min_pos);
        }
    return out;
}

struct HistogramBin {
    double lo = 0, hi = 0;
    std::size_t count = 0;
};

// Absolute reprojection-error statistics over an instance mask. Hole pixels
// (mask pixels with invalid observed depth) are reported separately and do
// not enter the error statistics.
struct ErrorStats {
    std::size_t sample_count = 0;
    double hole_fraction = 0;
    double mean_abs = 0;
    double median_abs = 0;
    double p95_abs = 0;
    double mean_signed = 0;
    double std_signed = 0;
    std::vector<HistogramBin> histogram;
};

inline ErrorStats reprojection_error_stats(const Raster<double>& observed_depth,
                                           const MaskRaster& observed_valid,
                                           const Raster<double>& dprime, const MaskRaster& mask,
                                           int histogram_bins = 50) {
    if (observed_depth.width != dprime.width || observed_depth.height != dprime.height ||
        mask.width != dprime.width || mask.height != dprime.height)
        throw std::invalid_argument("raster shapes differ");
    std::vector<double> abs_err;
    double sum = 0, sum_sq = 0;
    std::size_t holes = 0, mask_pixels = 0;
    for (int i = 0; i < mask.height; ++i)
        for (int j = 0; j < mask.width; ++j) {
            if (!mask.at(i, j)) continue;
            ++mask_pixels;
            if (!observed_valid.at(i, j)) {
                ++holes;
                continue;
            }
            double e = observed_depth.at(i, j) - dprime.at(i, j);
            sum += e;
            sum_sq += e * e;
            abs_err.push_back(std::abs(e));
        }
    if (mask_pixels == 0) throw EmptyMask();

    ErrorStats s;
    s.sample_count = abs_err.size();
    s.hole_fraction = double(holes) / double(mask_pixels);
    if (!abs_err.empty()) {
        std::sort(abs_err.begin(), abs_err.end());
        double n = double(abs_err.size());
        double abs_sum = 0;
        for (double e : abs_err) abs_sum += e;
        s.mean_abs = abs_sum / n;
        s.median_abs = abs_err[abs_err.size() / 2];
        s.p95_abs = abs_err[std::min(abs_err.size() - 1, std::size_t(0.95 * n))];
        s.mean_signed = sum / n;
        double var = sum_sq / n - s.mean_signed * s.mean_signed;
        s.std_signed = std::sqrt(std::max(0.0, var));

        double hi = std::max(abs_err.back(), 1e-12);
        double w = hi / histogram_bins;
        s.histogram.resize(histogram_bins);
        for (int b = 0; b < histogram_bins; ++b) {
            s.histogram[b].lo = b * w;
            s.histogram[b].hi = (b + 1) * w;
        }
        for (double e : abs_err) {
            int b = std::min(histogram_bins - 1, int(e / w));
            ++s.histogram[b].count;
        }
    }
    return s;
}

// Pools previously computed per-scene samples into one histogram. Used by the
// corpus-level statistics run.
inline ErrorStats pooled_error_stats(const std::vector<double>& signed_errors,
                                     std::size_t mask_pixels, std::size_t holes,
                                     int histogram_bins = 50) {
    if (mask_pixels == 0) throw EmptyMask();
    ErrorStats s;
    s.sample_count = signed_errors.size();
    s.hole_fraction = double(holes) / double(mask_pixels);
    if (signed_errors.empty()) return s;
    std::vector<double> abs_err;
    abs_err.reserve(signed_errors.size());
    double sum = 0, sum_sq = 0;
    for (double e : signed_errors) {
        sum += e;
        sum_sq += e * e;
        abs_err.push_back(std::abs(e));
    }
    std::sort(abs_err.begin(), abs_err.end());
    double n = double(abs_err.size());
    double abs_sum = 0;
    for (double e : abs_err) abs_sum += e;
    s.mean_abs = abs_sum / n;
    s.median_abs = abs_err[abs_err.size() / 2];
    s.p95_abs = abs_err[std::min(abs_err.size() - 1, std::size_t(0.95 * n))];
    s.mean_signed = sum / n;
    s.std_signed = std::sqrt(std::max(0.0, sum_sq / n - s.mean_signed * s.mean_signed));
    double hi = std::max(abs_err.back(), 1e-12);
    double w = hi / histogram_bins;
    s.histogram.resize(histogram_bins);
    for (int b = 0; b < histogram_bins; ++b) {
        s.histogram[b].lo = b * w;
        s.histogram[b].hi = (b + 1) * w;
    }
    for (double e : abs_err) ++s.histogram[std::min(histogram_bins - 1, int(e / w))].count;
    return s;
}

}  // namespace posebench
