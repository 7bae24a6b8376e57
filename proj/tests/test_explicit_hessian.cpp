#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "nlh/explicit_hessian.hpp"

using namespace nlh;

namespace {

template <class F>
ImageGrid sample(F f, int w, int h, double spacing = 1.0) {
    ImageGrid img(w, h, 0.0, spacing);
    for (int iy = 0; iy < h; ++iy)
        for (int ix = 0; ix < w; ++ix) img(ix, iy) = f(ix * spacing, iy * spacing);
    return img;
}

/// Random field vanishing on a border band of the given width.
ImageGrid compact_random(int n, int band, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    ImageGrid img(n, n);
    for (int iy = band; iy < n - band; ++iy)
        for (int ix = band; ix < n - band; ++ix) img(ix, iy) = d(rng);
    return img;
}

const MollifierFamily kAll[] = {{MollifierKind::ball, 3.0},
                                {MollifierKind::annulus, 4.0},
                                {MollifierKind::gaussian, 1.5}};

}  // namespace

TEST_CASE("lattice taps have unit mass and non-negative weights") {
    for (const auto& rho : kAll) {
        for (double spacing : {1.0, 0.5}) {
            double total = 0.0;
            for (const auto& t : rho.lattice_taps(spacing)) {
                CHECK(t.weight >= 0.0);
                CHECK_FALSE((t.offset.dx == 0 && t.offset.dy == 0));
                CHECK(std::hypot(t.offset.dx, t.offset.dy) * spacing <= rho.radius() + 1e-12);
                total += t.weight;
            }
            CHECK(std::abs(total - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("continuous densities integrate to one") {
    for (const auto& rho : kAll) {
        std::vector<double> r, w;
        gauss_legendre(200, rho.inner_radius(), rho.radius(), r, w);
        double mass = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i) mass += 2 * std::numbers::pi * r[i] * w[i] * rho.density(r[i]);
        CHECK(mass == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(rho.density(rho.radius() * 1.01) == 0.0);
    }
}

TEST_CASE("under-resolved mollifiers are rejected") {
    const MollifierFamily rho{MollifierKind::ball, 0.5};
    CHECK_THROWS_WITH_AS(rho.lattice_taps(1.0), doctest::Contains("mollifier under-resolved"),
                         Error);
    CHECK_NOTHROW(rho.lattice_taps(0.25));
    CHECK_THROWS_WITH_AS(explicit_nl_hessian(ImageGrid(8, 8), rho),
                         doctest::Contains("under-resolved"), Error);
}

TEST_CASE("mollifier names round-trip") {
    for (auto k : {MollifierKind::ball, MollifierKind::gaussian, MollifierKind::annulus}) {
        CHECK(mollifier_kind_from_string(to_string(k)) == k);
    }
    CHECK_THROWS_AS(mollifier_kind_from_string("box"), Error);
}

TEST_CASE("explicit Hessian of polynomials") {
    // Midpoint lattice quadrature carries an O((spacing/delta)^2) angular bias,
    // about 1e-3 at delta = 16 spacings.
    const MollifierFamily rho{MollifierKind::gaussian, 2.0};
    const double spacing = 0.125;
    const int n = 144;
    const double c = 0.5 * (n - 1) * spacing;
    const ImageGrid affine =
        sample([](double x, double y) { return 0.2 + 0.3 * x - 0.1 * y; }, n, n, spacing);
    const SymmetricField ha = explicit_nl_hessian(affine, rho);
    const ImageGrid sq = sample([c](double x, double) { return (x - c) * (x - c); }, n, n, spacing);
    const SymmetricField hs = explicit_nl_hessian(sq, rho);
    const ImageGrid mixed =
        sample([c](double x, double y) { return (x - c) * (y - c); }, n, n, spacing);
    const SymmetricField hm = explicit_nl_hessian(mixed, rho);
    // Interior pixels whose footprint stays clear of the reflected border.
    for (int iy = 66; iy < n - 66; ++iy) {
        for (int ix = 66; ix < n - 66; ++ix) {
            CHECK(std::abs(ha.xx(ix, iy)) <= 1e-9);
            CHECK(std::abs(ha.xy(ix, iy)) <= 1e-9);
            CHECK(std::abs(ha.yy(ix, iy)) <= 1e-9);
            CHECK(std::abs(hs.xx(ix, iy) - 2.0) <= 1e-3);
            CHECK(std::abs(hs.xy(ix, iy)) <= 1e-9);
            CHECK(std::abs(hs.yy(ix, iy)) <= 1e-3);
            CHECK(std::abs(hm.xy(ix, iy) - 1.0) <= 1e-3);
            CHECK(std::abs(hm.xx(ix, iy)) <= 1e-9);
        }
    }
}

TEST_CASE("trace of the explicit Hessian equals the non-local Laplacian") {
    // tr(hh'/|h|^2 - I/4) = 1/2, so tr H = 2 sum_h w(h) second difference / |h|^2.
    const MollifierFamily rho{MollifierKind::ball, 2.5};
    const ImageGrid u = compact_random(24, 0, 3);
    const SymmetricField h = explicit_nl_hessian(u, rho);
    const auto taps = rho.lattice_taps(1.0);
    for (int iy = 4; iy < 20; ++iy) {
        for (int ix = 4; ix < 20; ++ix) {
            double lap = 0.0;
            for (const auto& t : taps) {
                const double r2 = t.offset.dx * t.offset.dx + t.offset.dy * t.offset.dy;
                lap += t.weight *
                       (u(ix + t.offset.dx, iy + t.offset.dy) - u(ix, iy)) / r2;
            }
            CHECK(h.xx(ix, iy) + h.yy(ix, iy) == doctest::Approx(4.0 * lap).epsilon(1e-10));
        }
    }
}

TEST_CASE("explicit Hessian at a point on analytic functions") {
    const MollifierFamily rho{MollifierKind::ball, 0.01};
    const ScalarFunction f = [](double x, double y) { return std::sin(x) * std::cos(y); };
    const SymmetricMatrix2 h = explicit_nl_hessian_at(f, 0.4, 0.7, rho);
    CHECK(h.xx == doctest::Approx(-std::sin(0.4) * std::cos(0.7)).epsilon(1e-4));
    CHECK(h.xy == doctest::Approx(-std::cos(0.4) * std::sin(0.7)).epsilon(1e-4));
    CHECK(h.yy == doctest::Approx(-std::sin(0.4) * std::cos(0.7)).epsilon(1e-4));

    const ScalarFunction q = [](double x, double y) { return x * x + 3 * x * y - y * y; };
    for (const auto& r : kAll) {
        const SymmetricMatrix2 hq = explicit_nl_hessian_at(q, 1.0, -2.0, r);
        CHECK(hq.xx == doctest::Approx(2.0).epsilon(1e-10));
        CHECK(hq.xy == doctest::Approx(3.0).epsilon(1e-10));
        CHECK(hq.yy == doctest::Approx(-2.0).epsilon(1e-10));
    }
}

TEST_CASE("second-order divergence") {
    const MollifierFamily rho{MollifierKind::ball, 2.0};
    const SymmetricField constant{ImageGrid(16, 16, 0.3), ImageGrid(16, 16, -0.2),
                                  ImageGrid(16, 16, 0.7)};
    const ImageGrid d = nl_divergence2(constant, rho);
    for (std::size_t p = 0; p < d.size(); ++p) CHECK(std::abs(d[p]) <= 1e-12);

    // phi = (x^2, 0, 0) and phi = (0, xy, 0) both have div2 = 2 (off-diagonal
    // counted twice). The lattice error shrinks with delta/spacing.
    const MollifierFamily g{MollifierKind::gaussian, 2.0};
    double previous = INFINITY;
    for (double spacing : {0.5, 0.25, 0.125}) {
        const int margin = static_cast<int>(std::ceil(g.radius() / spacing)) + 2;
        const int n = 2 * margin + 8;
        const double c = 0.5 * (n - 1) * spacing;
        const SymmetricField a{
            sample([c](double x, double) { return (x - c) * (x - c); }, n, n, spacing),
            ImageGrid(n, n, 0.0, spacing), ImageGrid(n, n, 0.0, spacing)};
        const SymmetricField b{
            ImageGrid(n, n, 0.0, spacing),
            sample([c](double x, double y) { return (x - c) * (y - c); }, n, n, spacing),
            ImageGrid(n, n, 0.0, spacing)};
        const ImageGrid da = nl_divergence2(a, g);
        const ImageGrid db = nl_divergence2(b, g);
        double err = 0.0;
        for (int iy = margin; iy < n - margin; ++iy) {
            for (int ix = margin; ix < n - margin; ++ix) {
                err = std::max({err, std::abs(da(ix, iy) - 2.0), std::abs(db(ix, iy) - 2.0)});
            }
        }
        CHECK(err < 0.5 * previous);
        previous = err;
    }
    CHECK(previous <= 3e-3);
    CHECK_THROWS_AS(nl_divergence2({ImageGrid(4, 4), ImageGrid(4, 5), ImageGrid(4, 4)}, rho),
                    Error);
}

TEST_CASE("explicit Hessian and second-order divergence are adjoint") {
    const int n = 40;
    for (const auto& rho : kAll) {
        const int band = static_cast<int>(std::ceil(rho.radius())) + 1;
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            const ImageGrid u = compact_random(n, band, seed);
            const SymmetricField phi{compact_random(n, band, seed + 10),
                                     compact_random(n, band, seed + 20),
                                     compact_random(n, band, seed + 30)};
            const double lhs = pairing(explicit_nl_hessian(u, rho), phi);
            const double rhs = pairing(u, nl_divergence2(phi, rho));
            const double scale =
                std::sqrt(pairing(u, u)) * std::sqrt(pairing(phi, phi));
            CHECK(std::abs(lhs - rhs) <= 1e-10 * scale);
        }
    }
}

TEST_CASE("explicit Hessian is linear") {
    const MollifierFamily rho{MollifierKind::annulus, 3.0};
    const ImageGrid zero(20, 20);
    const SymmetricField hz = explicit_nl_hessian(zero, rho);
    for (std::size_t p = 0; p < zero.size(); ++p) CHECK(hz.xx[p] == 0.0);

    const ImageGrid u = compact_random(20, 0, 1);
    const ImageGrid v = compact_random(20, 0, 2);
    ImageGrid w(20, 20);
    for (std::size_t p = 0; p < w.size(); ++p) w[p] = 2.0 * u[p] - 0.5 * v[p];
    const SymmetricField hu = explicit_nl_hessian(u, rho);
    const SymmetricField hv = explicit_nl_hessian(v, rho);
    const SymmetricField hw = explicit_nl_hessian(w, rho);
    for (std::size_t p = 0; p < w.size(); ++p) {
        CHECK(hw.xx[p] == doctest::Approx(2.0 * hu.xx[p] - 0.5 * hv.xx[p]).epsilon(1e-10));
        CHECK(hw.xy[p] == doctest::Approx(2.0 * hu.xy[p] - 0.5 * hv.xy[p]).epsilon(1e-10));
    }
}

TEST_CASE("shrinking the mollifier localises the explicit Hessian") {
    const ScalarFunction bump = [](double x, double y) {
        return std::exp(-(x * x + y * y) / (2.0 * 0.5 * 0.5));
    };
    double previous = INFINITY;
    for (double delta : {0.4, 0.2, 0.1, 0.05, 0.025}) {
        const SymmetricMatrix2 h =
            explicit_nl_hessian_at(bump, 0.3, -0.2, {MollifierKind::ball, delta});
        // Exact Hessian of the bump at (0.3, -0.2).
        const double s2 = 0.25, x = 0.3, y = -0.2, e = bump(x, y);
        const double exx = e * (x * x / (s2 * s2) - 1 / s2);
        const double exy = e * (x * y / (s2 * s2));
        const double eyy = e * (y * y / (s2 * s2) - 1 / s2);
        const double err = frobenius(h.xx - exx, h.xy - exy, h.yy - eyy);
        CHECK(err < previous);
        previous = err;
    }
    CHECK(previous < 1e-3);
}
