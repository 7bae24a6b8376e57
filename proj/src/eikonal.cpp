#include "nlh/eikonal.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <sstream>

#include "nlh/metrics.hpp"

namespace nlh {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

MetricField build_metric(const ImageGrid& g, double gamma) {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) {
        throw Error("build_metric: gamma must be positive");
    }
    const VectorField grad = central_gradient(g);
    ImageGrid slowness(g.width(), g.height(), 0.0, g.spacing());
    for (std::size_t i = 0; i < slowness.size(); ++i) {
        slowness[i] = grad.x[i] * grad.x[i] + grad.y[i] * grad.y[i] + gamma;
    }
    return {std::move(slowness), gamma};
}

double upwind_update(double a, double b, double step) {
    if (a > b) std::swap(a, b);
    if (a == kInf) return kInf;
    if (b == kInf || b - a >= step) return a + step;
    // (c - a)^2 + (c - b)^2 = step^2, larger root.
    const double diff = b - a;
    return 0.5 * (a + b + std::sqrt(2.0 * step * step - diff * diff));
}

FastMarcher::FastMarcher(const MetricField& metric)
    : slowness_(&metric.slowness),
      width_(metric.slowness.width()),
      height_(metric.slowness.height()),
      spacing_(metric.slowness.spacing()),
      tentative_(metric.slowness.size(), kInf),
      accepted_(metric.slowness.size(), 0) {}

void FastMarcher::update(std::size_t idx) {
    const int ix = static_cast<int>(idx % static_cast<std::size_t>(width_));
    const int iy = static_cast<int>(idx / static_cast<std::size_t>(width_));
    double a = kInf;
    double b = kInf;
    if (ix > 0 && accepted_[idx - 1]) a = std::min(a, tentative_[idx - 1]);
    if (ix + 1 < width_ && accepted_[idx + 1]) a = std::min(a, tentative_[idx + 1]);
    if (iy > 0 && accepted_[idx - width_]) b = std::min(b, tentative_[idx - width_]);
    if (iy + 1 < height_ && accepted_[idx + width_]) b = std::min(b, tentative_[idx + width_]);
    const double c = upwind_update(a, b, (*slowness_)[idx] * spacing_);
    if (c < tentative_[idx]) {
        if (tentative_[idx] == kInf) touched_.push_back(idx);
        tentative_[idx] = c;
        heap_.emplace_back(c, idx);
        std::push_heap(heap_.begin(), heap_.end(), std::greater<>{});
    }
}

std::span<const AcceptedPixel> FastMarcher::march(PixelIndex source, std::size_t stop_count) {
    if (stop_count < 1) throw Error("fast_march_from: stop_count must be at least 1");
    if (!slowness_->contains(source)) throw Error("fast_march_from: source outside grid");

    for (std::size_t idx : touched_) {
        tentative_[idx] = kInf;
        accepted_[idx] = 0;
    }
    touched_.clear();
    order_.clear();
    heap_.clear();

    const std::size_t src = slowness_->index(source);
    tentative_[src] = 0.0;
    touched_.push_back(src);
    heap_.emplace_back(0.0, src);

    const std::size_t w = static_cast<std::size_t>(width_);
    while (!heap_.empty() && order_.size() < stop_count) {
        std::pop_heap(heap_.begin(), heap_.end(), std::greater<>{});
        const auto [dist, idx] = heap_.back();
        heap_.pop_back();
        if (accepted_[idx] || dist != tentative_[idx]) continue;
        accepted_[idx] = 1;
        order_.push_back({idx, dist});

        const int ix = static_cast<int>(idx % w);
        const int iy = static_cast<int>(idx / w);
        if (ix > 0 && !accepted_[idx - 1]) update(idx - 1);
        if (ix + 1 < width_ && !accepted_[idx + 1]) update(idx + 1);
        if (iy > 0 && !accepted_[idx - w]) update(idx - w);
        if (iy + 1 < height_ && !accepted_[idx + w]) update(idx + w);
    }
    return order_;
}

DistanceMap fast_march_from(PixelIndex source, const MetricField& metric, std::size_t stop_count) {
    FastMarcher marcher(metric);
    const auto accepted = marcher.march(source, stop_count);
    DistanceMap map{metric.slowness.width(), metric.slowness.height(),
                    std::vector<double>(metric.slowness.size(), kInf),
                    {accepted.begin(), accepted.end()}};
    for (const auto& a : accepted) map.distance[a.index] = a.distance;
    return map;
}

ImageGrid distance_map_image(const DistanceMap& map) {
    double top = 0.0;
    for (double d : map.distance) {
        if (std::isfinite(d)) top = std::max(top, d);
    }
    ImageGrid img(map.width, map.height, 1.0);
    if (top <= 0.0) top = 1.0;
    for (std::size_t i = 0; i < map.distance.size(); ++i) {
        if (std::isfinite(map.distance[i])) img[i] = map.distance[i] / top;
    }
    return img;
}

NeighborhoodWeights::NeighborhoodWeights(int width, int height, std::size_t m)
    : width_(width), height_(height), m_(m) {
    starts_.reserve(static_cast<std::size_t>(width) * height + 1);
    entries_.reserve(static_cast<std::size_t>(width) * height * m);
}

void NeighborhoodWeights::push_pixel(std::span<const NeighborEntry> entries) {
    if (pixel_count() >= static_cast<std::size_t>(width_) * height_) {
        throw Error("NeighborhoodWeights: more pixels than the grid holds");
    }
    entries_.insert(entries_.end(), entries.begin(), entries.end());
    starts_.push_back(entries_.size());
}

void NeighborhoodWeights::dump(std::ostream& os) const {
    os.precision(17);
    for (std::size_t p = 0; p < pixel_count(); ++p) {
        const int ix = static_cast<int>(p % static_cast<std::size_t>(width_));
        const int iy = static_cast<int>(p / static_cast<std::size_t>(width_));
        for (const auto& e : (*this)[p]) {
            os << ix << ',' << iy << ',' << e.offset.dx << ',' << e.offset.dy << ','
               << e.distance << '\n';
        }
    }
}

NeighborhoodWeights build_neighborhoods(const MetricField& metric, std::size_t m) {
    const ImageGrid& s = metric.slowness;
    const std::size_t n = s.size();
    if (m < 1 || m > n - 1) {
        std::ostringstream os;
        os << "build_neighborhoods: M=" << m << " out of range [1, " << n - 1 << "]";
        throw Error(os.str());
    }
    NeighborhoodWeights out(s.width(), s.height(), m);
    FastMarcher marcher(metric);
    std::vector<NeighborEntry> entries;
    entries.reserve(m);
    for (std::size_t p = 0; p < n; ++p) {
        const PixelIndex x = s.pixel(p);
        const auto accepted = marcher.march(x, m + 1);
        entries.clear();
        for (const auto& a : accepted) {
            if (a.index == p) continue;
            const PixelIndex y = s.pixel(a.index);
            entries.push_back({{y.ix - x.ix, y.iy - x.iy}, 1.0, a.distance});
        }
        out.push_pixel(entries);
    }
    return out;
}

NeighborhoodWeights build_neighborhoods(const ImageGrid& g, double gamma, std::size_t m) {
    return build_neighborhoods(build_metric(g, gamma), m);
}

std::vector<std::size_t> stencil_membership_counts(const NeighborhoodWeights& nbhd) {
    const std::size_t n = nbhd.pixel_count();
    const std::size_t w = static_cast<std::size_t>(nbhd.width());
    std::vector<std::size_t> counts(n, 1);
    for (std::size_t p = 0; p < n; ++p) {
        const long ix = static_cast<long>(p % w);
        const long iy = static_cast<long>(p / w);
        for (const auto& e : nbhd[p]) {
            const std::size_t q = static_cast<std::size_t>((iy + e.offset.dy) * static_cast<long>(w) +
                                                           ix + e.offset.dx);
            ++counts[q];
        }
    }
    return counts;
}

ImageGrid build_local_weights(const NeighborhoodWeights& nbhd, std::size_t m) {
    const auto counts = stencil_membership_counts(nbhd);
    ImageGrid omega(nbhd.width(), nbhd.height());
    for (std::size_t p = 0; p < counts.size(); ++p) {
        omega[p] = static_cast<double>(m) / static_cast<double>(counts[p]);
    }
    return omega;
}

}  // namespace nlh
