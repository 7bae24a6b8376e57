#include "nlh/image.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace nlh {

namespace {

void validate_shape(int width, int height, double spacing) {
    if (width < 1 || height < 1) {
        std::ostringstream os;
        os << "image dimensions must be positive, got " << width << "x" << height;
        throw Error(os.str());
    }
    if (!(spacing > 0.0) || !std::isfinite(spacing)) {
        throw Error("image spacing must be positive and finite");
    }
}

}  // namespace

ImageGrid::ImageGrid(int width, int height, double fill, double spacing)
    : width_(width), height_(height), spacing_(spacing) {
    validate_shape(width, height, spacing);
    if (!std::isfinite(fill)) throw Error("image fill value must be finite");
    values_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

ImageGrid::ImageGrid(int width, int height, std::vector<double> values, double spacing)
    : width_(width), height_(height), spacing_(spacing), values_(std::move(values)) {
    validate_shape(width, height, spacing);
    if (values_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        std::ostringstream os;
        os << "image value count " << values_.size() << " does not match " << width << "x"
           << height;
        throw Error(os.str());
    }
    require_finite("image");
}

double ImageGrid::min_value() const {
    return values_.empty() ? 0.0 : *std::min_element(values_.begin(), values_.end());
}

double ImageGrid::max_value() const {
    return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end());
}

void ImageGrid::require_finite(const std::string& what) const {
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i])) {
            const PixelIndex p = pixel(i);
            std::ostringstream os;
            os << what << ": non-finite value at pixel (" << p.ix << "," << p.iy << ")";
            throw NumericalError(os.str());
        }
    }
}

void require_same_shape(const ImageGrid& a, const ImageGrid& b, const char* what) {
    if (!a.same_shape(b)) {
        std::ostringstream os;
        os << what << ": dimension mismatch " << a.width() << "x" << a.height() << " vs "
           << b.width() << "x" << b.height();
        throw Error(os.str());
    }
}

ImageGrid clamp01(const ImageGrid& img) {
    ImageGrid out = img;
    for (double& v : out.values()) v = std::clamp(v, 0.0, 1.0);
    return out;
}

}  // namespace nlh
