#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nlh {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when an iteration produces non-finite values or fails to converge.
class NumericalError : public Error {
public:
    using Error::Error;
};

struct PixelIndex {
    int ix = 0;
    int iy = 0;

    friend bool operator==(const PixelIndex&, const PixelIndex&) = default;
};

/// Lattice displacement z = y - x between two pixels.
struct Offset {
    int dx = 0;
    int dy = 0;

    friend bool operator==(const Offset&, const Offset&) = default;
};

/// Scalar field on a regular 2D lattice, stored row-major (x fastest).
class ImageGrid {
public:
    ImageGrid() = default;
    ImageGrid(int width, int height, double fill = 0.0, double spacing = 1.0);
    ImageGrid(int width, int height, std::vector<double> values, double spacing = 1.0);

    int width() const { return width_; }
    int height() const { return height_; }
    double spacing() const { return spacing_; }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    double& operator()(int ix, int iy) { return values_[index(ix, iy)]; }
    double operator()(int ix, int iy) const { return values_[index(ix, iy)]; }
    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    std::size_t index(int ix, int iy) const {
        return static_cast<std::size_t>(iy) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(ix);
    }
    std::size_t index(PixelIndex p) const { return index(p.ix, p.iy); }
    PixelIndex pixel(std::size_t i) const {
        return {static_cast<int>(i % static_cast<std::size_t>(width_)),
                static_cast<int>(i / static_cast<std::size_t>(width_))};
    }
    bool contains(int ix, int iy) const {
        return ix >= 0 && iy >= 0 && ix < width_ && iy < height_;
    }
    bool contains(PixelIndex p) const { return contains(p.ix, p.iy); }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    std::vector<double>& raw() { return values_; }
    const std::vector<double>& raw() const { return values_; }

    bool same_shape(const ImageGrid& other) const {
        return width_ == other.width_ && height_ == other.height_;
    }

    double min_value() const;
    double max_value() const;
    /// Throws if any value is NaN or infinite.
    void require_finite(const std::string& what) const;

private:
    int width_ = 0;
    int height_ = 0;
    double spacing_ = 1.0;
    std::vector<double> values_;
};

/// Per-pixel 2-vector field, stored as two planes.
struct VectorField {
    ImageGrid x;
    ImageGrid y;
};

/// Per-pixel symmetric 2x2 field stored as (xx, xy, yy) planes.
struct SymmetricField {
    ImageGrid xx;
    ImageGrid xy;
    ImageGrid yy;
};

void require_same_shape(const ImageGrid& a, const ImageGrid& b, const char* what);

ImageGrid clamp01(const ImageGrid& img);

}  // namespace nlh
