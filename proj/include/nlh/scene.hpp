#pragma once

#include <cstdint>
#include <vector>

#include "nlh/image.hpp"

namespace nlh {

struct DiscSlopeParams {
    int n = 64;
    double radius = 20.0;
    double base = 0.1;
    double slope = 0.01;
    double jump = 0.4;
};

/// n x n image: base outside a centred disc, base + jump + slope*(x - n/2)
/// inside it. Piecewise affine with a jump across the disc boundary.
ImageGrid make_disc_slope(const DiscSlopeParams& params);

/// True for pixels strictly inside the disc used by make_disc_slope.
std::vector<bool> disc_mask(int n, double radius);

/// True for pixels with an 8-neighbour on the other side of the disc boundary.
std::vector<bool> disc_boundary_band(int n, double radius);

/// Height of the step between the two halves of make_opposing_slopes.
inline constexpr double kOpposingSlopesJump = 0.1;

/// Left half a*x, right half a*(n - x) + jump, with a = 1/n. Constant in y.
ImageGrid make_opposing_slopes(int n);

struct NoiseSpec {
    double sigma = 0.0;
    std::uint64_t seed = 0;
};

/// Adds i.i.d. N(0, sigma^2) noise. Deterministic for a given seed; not clamped.
ImageGrid add_gaussian_noise(const ImageGrid& img, const NoiseSpec& spec);

}  // namespace nlh
