#include "nlh/scene.hpp"

#include <random>
#include <sstream>

namespace nlh {

namespace {

bool inside_disc(int ix, int iy, int n, double radius) {
    const double cx = 0.5 * n;
    const double dx = ix - cx;
    const double dy = iy - cx;
    return dx * dx + dy * dy < radius * radius;
}

}  // namespace

ImageGrid make_disc_slope(const DiscSlopeParams& p) {
    if (p.n < 8) throw Error("make_disc_slope: n must be at least 8");
    if (!(p.radius > 0.0) || !(p.radius < 0.5 * p.n)) {
        std::ostringstream os;
        os << "make_disc_slope: radius must lie in (0, n/2), got " << p.radius;
        throw Error(os.str());
    }
    ImageGrid img(p.n, p.n, p.base);
    const double cx = 0.5 * p.n;
    for (int iy = 0; iy < p.n; ++iy) {
        for (int ix = 0; ix < p.n; ++ix) {
            if (inside_disc(ix, iy, p.n, p.radius)) {
                img(ix, iy) = p.base + p.jump + p.slope * (ix - cx);
            }
        }
    }
    return img;
}

std::vector<bool> disc_mask(int n, double radius) {
    std::vector<bool> mask(static_cast<std::size_t>(n) * n);
    for (int iy = 0; iy < n; ++iy) {
        for (int ix = 0; ix < n; ++ix) {
            mask[static_cast<std::size_t>(iy) * n + ix] = inside_disc(ix, iy, n, radius);
        }
    }
    return mask;
}

std::vector<bool> disc_boundary_band(int n, double radius) {
    const std::vector<bool> mask = disc_mask(n, radius);
    std::vector<bool> band(mask.size(), false);
    for (int iy = 0; iy < n; ++iy) {
        for (int ix = 0; ix < n; ++ix) {
            const bool here = mask[static_cast<std::size_t>(iy) * n + ix];
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int jx = ix + dx;
                    const int jy = iy + dy;
                    if (jx < 0 || jy < 0 || jx >= n || jy >= n) continue;
                    if (mask[static_cast<std::size_t>(jy) * n + jx] != here) {
                        band[static_cast<std::size_t>(iy) * n + ix] = true;
                    }
                }
            }
        }
    }
    return band;
}

ImageGrid make_opposing_slopes(int n) {
    if (n < 8) throw Error("make_opposing_slopes: n must be at least 8");
    const double a = 1.0 / n;
    const int half = n / 2;
    ImageGrid img(n, n);
    for (int iy = 0; iy < n; ++iy) {
        for (int ix = 0; ix < n; ++ix) {
            img(ix, iy) = ix < half ? a * ix : a * (n - ix) + kOpposingSlopesJump;
        }
    }
    return img;
}

ImageGrid add_gaussian_noise(const ImageGrid& img, const NoiseSpec& spec) {
    if (!(spec.sigma >= 0.0)) throw Error("add_gaussian_noise: sigma must be non-negative");
    ImageGrid out = img;
    if (spec.sigma == 0.0) return out;
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, spec.sigma);
    for (double& v : out.values()) v += normal(rng);
    return out;
}

}  // namespace nlh
