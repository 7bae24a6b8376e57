#include "nlh/explicit_hessian.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace nlh {

namespace {

/// Half-sample symmetric extension: ... 1 0 | 0 1 ... n-1 | n-1 n-2 ...
int reflect(int i, int n) {
    const int period = 2 * n;
    int r = i % period;
    if (r < 0) r += period;
    return r < n ? r : period - 1 - r;
}

double reflected(const ImageGrid& u, int ix, int iy) {
    return u(reflect(ix, u.width()), reflect(iy, u.height()));
}

/// Taps with offsets in the upper half plane; the omitted mirror images carry
/// identical terms, so each weight is doubled.
std::vector<LatticeTap> half_taps(const MollifierFamily& rho, double spacing) {
    std::vector<LatticeTap> half;
    for (const auto& t : rho.lattice_taps(spacing)) {
        const bool upper = t.offset.dy > 0 || (t.offset.dy == 0 && t.offset.dx > 0);
        if (upper) half.push_back({t.offset, 2.0 * t.weight});
    }
    return half;
}

struct TapKernel {
    Offset offset;
    double kxx, kxy, kyy;  // 4 w (h h'/|h|^2 - I/4) / |h|^2
};

std::vector<TapKernel> tap_kernels(const MollifierFamily& rho, double spacing) {
    std::vector<TapKernel> out;
    for (const auto& t : half_taps(rho, spacing)) {
        const double h1 = t.offset.dx * spacing;
        const double h2 = t.offset.dy * spacing;
        const double r2 = h1 * h1 + h2 * h2;
        const double s = 4.0 * t.weight / r2;
        out.push_back({t.offset, s * (h1 * h1 / r2 - 0.25), s * (h1 * h2 / r2),
                       s * (h2 * h2 / r2 - 0.25)});
    }
    return out;
}

}  // namespace

double MollifierFamily::radius() const {
    return kind == MollifierKind::gaussian ? kGaussianTruncation * delta : delta;
}

double MollifierFamily::inner_radius() const {
    return kind == MollifierKind::annulus ? 0.5 * delta : 0.0;
}

double MollifierFamily::density(double r) const {
    if (r < inner_radius() || r > radius()) return 0.0;
    const double pi = std::numbers::pi;
    switch (kind) {
        case MollifierKind::ball:
            return 1.0 / (pi * delta * delta);
        case MollifierKind::annulus:
            return 4.0 / (3.0 * pi * delta * delta);
        case MollifierKind::gaussian: {
            const double mass =
                2.0 * pi * delta * delta *
                (1.0 - std::exp(-0.5 * kGaussianTruncation * kGaussianTruncation));
            return std::exp(-0.5 * r * r / (delta * delta)) / mass;
        }
    }
    return 0.0;
}

std::vector<LatticeTap> MollifierFamily::lattice_taps(double spacing) const {
    if (!(delta >= spacing)) {
        std::ostringstream os;
        os << "mollifier under-resolved: delta " << delta << " below grid spacing " << spacing;
        throw Error(os.str());
    }
    const int reach = static_cast<int>(std::floor(radius() / spacing));
    std::vector<LatticeTap> taps;
    double total = 0.0;
    for (int dy = -reach; dy <= reach; ++dy) {
        for (int dx = -reach; dx <= reach; ++dx) {
            if (dx == 0 && dy == 0) continue;
            const double r = std::hypot(dx * spacing, dy * spacing);
            const double w = density(r) * spacing * spacing;
            if (w > 0.0) {
                taps.push_back({{dx, dy}, w});
                total += w;
            }
        }
    }
    if (taps.empty()) throw Error("mollifier under-resolved: no lattice offsets in support");
    for (auto& t : taps) t.weight /= total;
    return taps;
}

const char* to_string(MollifierKind kind) {
    switch (kind) {
        case MollifierKind::ball: return "ball";
        case MollifierKind::gaussian: return "gaussian";
        case MollifierKind::annulus: return "annulus";
    }
    return "?";
}

MollifierKind mollifier_kind_from_string(const std::string& name) {
    if (name == "ball") return MollifierKind::ball;
    if (name == "gaussian") return MollifierKind::gaussian;
    if (name == "annulus") return MollifierKind::annulus;
    throw Error("unknown mollifier kind '" + name + "'");
}

SymmetricField explicit_nl_hessian(const ImageGrid& u, const MollifierFamily& rho) {
    const auto kernels = tap_kernels(rho, u.spacing());
    const int w = u.width();
    const int h = u.height();
    SymmetricField out{ImageGrid(w, h, 0.0, u.spacing()), ImageGrid(w, h, 0.0, u.spacing()),
                       ImageGrid(w, h, 0.0, u.spacing())};
    for (int iy = 0; iy < h; ++iy) {
        for (int ix = 0; ix < w; ++ix) {
            const double c = 2.0 * u(ix, iy);
            double xx = 0.0, xy = 0.0, yy = 0.0;
            for (const auto& k : kernels) {
                const double d2 = reflected(u, ix + k.offset.dx, iy + k.offset.dy) - c +
                                  reflected(u, ix - k.offset.dx, iy - k.offset.dy);
                xx += k.kxx * d2;
                xy += k.kxy * d2;
                yy += k.kyy * d2;
            }
            out.xx(ix, iy) = xx;
            out.xy(ix, iy) = xy;
            out.yy(ix, iy) = yy;
        }
    }
    return out;
}

ImageGrid nl_divergence2(const SymmetricField& phi, const MollifierFamily& rho) {
    if (!phi.xx.same_shape(phi.xy) || !phi.xx.same_shape(phi.yy)) {
        throw Error("nl_divergence2: component dimension mismatch");
    }
    const auto kernels = tap_kernels(rho, phi.xx.spacing());
    const int w = phi.xx.width();
    const int h = phi.xx.height();
    ImageGrid out(w, h, 0.0, phi.xx.spacing());
    for (int iy = 0; iy < h; ++iy) {
        for (int ix = 0; ix < w; ++ix) {
            double acc = 0.0;
            for (const auto& k : kernels) {
                const int px = ix + k.offset.dx, py = iy + k.offset.dy;
                const int mx = ix - k.offset.dx, my = iy - k.offset.dy;
                const double dxx = reflected(phi.xx, px, py) - 2.0 * phi.xx(ix, iy) +
                                   reflected(phi.xx, mx, my);
                const double dxy = reflected(phi.xy, px, py) - 2.0 * phi.xy(ix, iy) +
                                   reflected(phi.xy, mx, my);
                const double dyy = reflected(phi.yy, px, py) - 2.0 * phi.yy(ix, iy) +
                                   reflected(phi.yy, mx, my);
                acc += k.kxx * dxx + 2.0 * k.kxy * dxy + k.kyy * dyy;
            }
            out(ix, iy) = acc;
        }
    }
    return out;
}

double pairing(const SymmetricField& a, const SymmetricField& b) {
    require_same_shape(a.xx, b.xx, "pairing");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.xx.size(); ++i) {
        acc += a.xx[i] * b.xx[i] + 2.0 * a.xy[i] * b.xy[i] + a.yy[i] * b.yy[i];
    }
    return acc;
}

double pairing(const ImageGrid& a, const ImageGrid& b) {
    require_same_shape(a, b, "pairing");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

void gauss_legendre(int n, double a, double b, std::vector<double>& nodes,
                    std::vector<double>& weights) {
    nodes.assign(static_cast<std::size_t>(n), 0.0);
    weights.assign(static_cast<std::size_t>(n), 0.0);
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = 0.0;
            for (int k = 1; k <= n; ++k) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p2) / k;
            }
            dp = n * (x * p0 - p1) / (x * x - 1.0);
            const double dx = p0 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        const double wt = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[static_cast<std::size_t>(i)] = mid - half * x;
        nodes[static_cast<std::size_t>(n - 1 - i)] = mid + half * x;
        weights[static_cast<std::size_t>(i)] = half * wt;
        weights[static_cast<std::size_t>(n - 1 - i)] = half * wt;
    }
}

SymmetricMatrix2 explicit_nl_hessian_at(const ScalarFunction& u, double x, double y,
                                        const MollifierFamily& rho, const PolarRule& rule) {
    std::vector<double> rn, rw;
    gauss_legendre(rule.radial, rho.inner_radius(), rho.radius(), rn, rw);
    const double ux2 = 2.0 * u(x, y);
    const double dtheta = std::numbers::pi / rule.angular;
    SymmetricMatrix2 acc;
    for (std::size_t i = 0; i < rn.size(); ++i) {
        const double r = rn[i];
        // Area element r dr dtheta; the half circle counts twice.
        const double shell = 2.0 * rw[i] * r * rho.density(r) * dtheta / (r * r);
        for (int k = 0; k < rule.angular; ++k) {
            const double t = (k + 0.5) * dtheta;
            const double n1 = std::cos(t), n2 = std::sin(t);
            const double d2 = u(x + r * n1, y + r * n2) - ux2 + u(x - r * n1, y - r * n2);
            acc.xx += shell * d2 * (n1 * n1 - 0.25);
            acc.xy += shell * d2 * (n1 * n2);
            acc.yy += shell * d2 * (n2 * n2 - 0.25);
        }
    }
    return {4.0 * acc.xx, 4.0 * acc.xy, 4.0 * acc.yy};
}

}  // namespace nlh
