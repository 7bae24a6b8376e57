#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "nlh/image.hpp"

namespace nlh {

/// Slowness phi(grad g) = |grad g|^2 + gamma of the Eikonal equation.
struct MetricField {
    ImageGrid slowness;
    double gamma = 0.0;
};

MetricField build_metric(const ImageGrid& g, double gamma);

struct AcceptedPixel {
    std::size_t index = 0;
    double distance = 0.0;
};

/// Solves |grad c| = slowness with c(source) = 0 by first-order upwind Fast
/// Marching on the 4-neighbour lattice. Work arrays are reused between calls,
/// so one instance marches from many sources cheaply. Not thread-safe; use one
/// instance per thread.
class FastMarcher {
public:
    explicit FastMarcher(const MetricField& metric);

    /// Accepts pixels in order of arrival time until stop_count pixels are
    /// accepted or the front is exhausted. The source comes first with c = 0.
    /// Equal times are accepted in increasing pixel index order. The returned
    /// span is valid until the next call.
    std::span<const AcceptedPixel> march(PixelIndex source, std::size_t stop_count);

private:
    void update(std::size_t idx);

    const ImageGrid* slowness_;
    int width_;
    int height_;
    double spacing_;
    std::vector<double> tentative_;
    std::vector<char> accepted_;
    std::vector<std::size_t> touched_;
    std::vector<AcceptedPixel> order_;
    std::vector<std::pair<double, std::size_t>> heap_;
};

/// Upwind local solve shared by the fast and reference marchers. `a` and `b`
/// are the smallest accepted arrival times along x and y (infinity if none),
/// `step` the slowness times the grid spacing.
double upwind_update(double a, double b, double step);

/// Partial arrival-time map: infinity wherever the march stopped short.
struct DistanceMap {
    int width = 0;
    int height = 0;
    std::vector<double> distance;
    std::vector<AcceptedPixel> order;
};

DistanceMap fast_march_from(PixelIndex source, const MetricField& metric, std::size_t stop_count);

/// Distances scaled to [0,1] by the largest finite value; unreached pixels map to 1.
ImageGrid distance_map_image(const DistanceMap& map);

struct NeighborEntry {
    Offset offset;
    double weight = 1.0;
    double distance = 0.0;
};

/// Per-pixel lists of the M geodesically closest other pixels, in ascending
/// distance, with binary weights.
class NeighborhoodWeights {
public:
    NeighborhoodWeights() = default;
    NeighborhoodWeights(int width, int height, std::size_t m);

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t pixel_count() const { return starts_.empty() ? 0 : starts_.size() - 1; }
    std::size_t m() const { return m_; }

    std::span<const NeighborEntry> operator[](std::size_t pixel) const {
        return {entries_.data() + starts_[pixel], starts_[pixel + 1] - starts_[pixel]};
    }

    /// Appends the neighbourhood of the next pixel in row-major order.
    void push_pixel(std::span<const NeighborEntry> entries);

    /// One line "x_ix,x_iy,dx,dy,distance" per entry.
    void dump(std::ostream& os) const;

private:
    int width_ = 0;
    int height_ = 0;
    std::size_t m_ = 0;
    std::vector<NeighborEntry> entries_;
    std::vector<std::size_t> starts_{0};
};

/// Marches M+1 pixels from every pixel and keeps the M closest besides itself.
/// Requires 1 <= M <= width*height - 1.
NeighborhoodWeights build_neighborhoods(const MetricField& metric, std::size_t m);
NeighborhoodWeights build_neighborhoods(const ImageGrid& g, double gamma, std::size_t m);

/// omega(x) = M / #{y : x is y or x is in the neighbourhood of y}.
ImageGrid build_local_weights(const NeighborhoodWeights& nbhd, std::size_t m);

/// Reference counts behind build_local_weights.
std::vector<std::size_t> stencil_membership_counts(const NeighborhoodWeights& nbhd);

}  // namespace nlh
