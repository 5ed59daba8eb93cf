#pragma once

#include <cassert>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace posebench {

struct EmptyMask : std::runtime_error {
    EmptyMask() : std::runtime_error("mask selects no pixels") {}
};

// Dense row-major image plane. Indexing is (row i, column j).
template <typename T>
struct Raster {
    int width = 0;
    int height = 0;
    std::vector<T> data;

    Raster() = default;
    Raster(int w, int h, T fill = T{}) : width(w), height(h), data(size_t(w) * size_t(h), fill) {}

    T& at(int i, int j) {
        assert(i >= 0 && i < height && j >= 0 && j < width);
        return data[size_t(i) * width + j];
    }
    const T& at(int i, int j) const {
        assert(i >= 0 && i < height && j >= 0 && j < width);
        return data[size_t(i) * width + j];
    }

    bool in_bounds(int i, int j) const { return i >= 0 && i < height && j >= 0 && j < width; }
    size_t size() const { return data.size(); }
    bool same_shape(int w, int h) const { return width == w && height == h; }

    bool operator==(const Raster&) const = default;
};

using MaskRaster = Raster<std::uint8_t>;

inline size_t count_true(const MaskRaster& m) {
    size_t n = 0;
    for (auto v : m.data) n += (v != 0);
    return n;
}

}  // namespace posebench
