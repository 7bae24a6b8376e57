#include "nlh/verify.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "nlh/explicit_hessian.hpp"
#include "nlh/nl_hessian.hpp"

namespace nlh {

namespace {

const double kPi = std::numbers::pi;

struct Moments {
    double offdiag = 0.0;  // integral of nu_1^2 nu_2^2 (nu_1^2 nu_3^2 on S^2)
    double diag = 0.0;     // integral of nu_1^4 (nu_3^4 on S^2)
};

Moments trapezoid_s1(int n) {
    Moments m;
    const double dt = 2.0 * kPi / n;
    for (int k = 0; k < n; ++k) {
        const double c = std::cos(k * dt), s = std::sin(k * dt);
        m.offdiag += c * c * s * s * dt;
        m.diag += c * c * c * c * dt;
    }
    return m;
}

Moments monte_carlo_s1(long samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * kPi);
    double off = 0.0, diag = 0.0;
    for (long i = 0; i < samples; ++i) {
        const double t = angle(rng);
        const double c2 = std::cos(t) * std::cos(t);
        off += c2 * (1.0 - c2);
        diag += c2 * c2;
    }
    return {2.0 * kPi * off / samples, 2.0 * kPi * diag / samples};
}

/// Gauss-Legendre in cos(theta), trapezoid in phi.
Moments quadrature_s2(int n_theta, int n_phi) {
    std::vector<double> z, w;
    gauss_legendre(n_theta, -1.0, 1.0, z, w);
    Moments m;
    const double dphi = 2.0 * kPi / n_phi;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double st2 = 1.0 - z[i] * z[i];
        for (int k = 0; k < n_phi; ++k) {
            const double c = std::cos(k * dphi);
            m.offdiag += w[i] * dphi * st2 * c * c * z[i] * z[i];
            m.diag += w[i] * dphi * z[i] * z[i] * z[i] * z[i];
        }
    }
    return m;
}

Moments monte_carlo_s2(long samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    double off = 0.0, diag = 0.0;
    for (long i = 0; i < samples; ++i) {
        const double a = normal(rng), b = normal(rng), c = normal(rng);
        const double r2 = a * a + b * b + c * c;
        const double n1 = a * a / r2, n3 = c * c / r2;
        off += n1 * n3;
        diag += n3 * n3;
    }
    return {4.0 * kPi * off / samples, 4.0 * kPi * diag / samples};
}

struct TestFunction {
    const char* name;
    ScalarFunction u;
    std::function<SymmetricMatrix2(double, double)> hessian;
};

std::vector<TestFunction> smooth_functions() {
    return {
        {"sin(x)cos(y)", [](double x, double y) { return std::sin(x) * std::cos(y); },
         [](double x, double y) {
             return SymmetricMatrix2{-std::sin(x) * std::cos(y), -std::cos(x) * std::sin(y),
                                     -std::sin(x) * std::cos(y)};
         }},
        {"exp(-(x^2+2y^2)/2)",
         [](double x, double y) { return std::exp(-0.5 * (x * x + 2.0 * y * y)); },
         [](double x, double y) {
             const double e = std::exp(-0.5 * (x * x + 2.0 * y * y));
             return SymmetricMatrix2{e * (x * x - 1.0), e * 2.0 * x * y,
                                     e * (4.0 * y * y - 2.0)};
         }},
        {"cos(x+2y)+x^3y", [](double x, double y) { return std::cos(x + 2.0 * y) + x * x * x * y; },
         [](double x, double y) {
             const double c = std::cos(x + 2.0 * y);
             return SymmetricMatrix2{-c + 6.0 * x * y, -2.0 * c + 3.0 * x * x, -4.0 * c};
         }},
    };
}

double frob(const SymmetricMatrix2& a) { return frobenius(a.xx, a.xy, a.yy); }

SymmetricMatrix2 minus(const SymmetricMatrix2& a, const SymmetricMatrix2& b) {
    return {a.xx - b.xx, a.xy - b.xy, a.yy - b.yy};
}

/// Dense normal-equation solve of the circle least-squares problem.
SymmetricMatrix2 circle_least_squares(const ScalarFunction& u, double x, double y, double h,
                                      int samples) {
    Eigen::Matrix<double, 5, 5> normal = Eigen::Matrix<double, 5, 5>::Zero();
    Eigen::Matrix<double, 5, 1> rhs = Eigen::Matrix<double, 5, 1>::Zero();
    const double u0 = u(x, y);
    for (int k = 0; k < samples; ++k) {
        const double t = 2.0 * kPi * k / samples;
        const double z1 = h * std::cos(t), z2 = h * std::sin(t);
        Eigen::Matrix<double, 5, 1> a;
        a << z1, z2, 0.5 * z1 * z1, z1 * z2, 0.5 * z2 * z2;
        normal += a * a.transpose();
        rhs += a * (u(x + z1, y + z2) - u0);
    }
    const Eigen::Matrix<double, 5, 1> p = normal.ldlt().solve(rhs);
    return {p(2), p(3), p(4)};
}

/// Midpoint rule over the square [-R, R]^2 with the cell corner at the origin.
SymmetricMatrix2 explicit_cartesian(const ScalarFunction& u, double x, double y,
                                    const MollifierFamily& rho, int cells_per_side) {
    const double r = rho.radius();
    const double dh = 2.0 * r / cells_per_side;
    const double u2 = 2.0 * u(x, y);
    SymmetricMatrix2 acc;
    for (int j = 0; j < cells_per_side / 2; ++j) {  // upper half plane, doubled
        const double h2 = (j + 0.5) * dh;
        for (int i = 0; i < cells_per_side; ++i) {
            const double h1 = -r + (i + 0.5) * dh;
            const double q = h1 * h1 + h2 * h2;
            const double w = rho.density(std::sqrt(q));
            if (w == 0.0) continue;
            const double d2 = u(x + h1, y + h2) - u2 + u(x - h1, y - h2);
            const double s = 2.0 * 4.0 * w * dh * dh * d2 / q;
            acc.xx += s * (h1 * h1 / q - 0.25);
            acc.xy += s * (h1 * h2 / q);
            acc.yy += s * (h2 * h2 / q - 0.25);
        }
    }
    return acc;
}

/// Sum over radial shells of implicit_on_circle weighted by the shell mass.
SymmetricMatrix2 explicit_by_shells(const ScalarFunction& u, double x, double y,
                                    const MollifierFamily& rho, int shells, int samples) {
    std::vector<double> r, w;
    gauss_legendre(shells, rho.inner_radius(), rho.radius(), r, w);
    SymmetricMatrix2 acc;
    for (std::size_t i = 0; i < r.size(); ++i) {
        const SymmetricMatrix2 h = implicit_on_circle(u, x, y, r[i], samples);
        const double mass = 2.0 * kPi * r[i] * rho.density(r[i]) * w[i];
        acc.xx += mass * h.xx;
        acc.xy += mass * h.xy;
        acc.yy += mass * h.yy;
    }
    return acc;
}

ImageGrid compact_random(int n, int band, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    ImageGrid img(n, n);
    for (int iy = band; iy < n - band; ++iy)
        for (int ix = band; ix < n - band; ++ix) img(ix, iy) = d(rng);
    return img;
}

std::string fmt(const char* prefix, double v) {
    std::ostringstream os;
    os << prefix << v;
    return os.str();
}

}  // namespace

CheckResult make_check(std::string name, double measured, double expected, double tolerance,
                       Comparison comparison) {
    CheckResult c{std::move(name), measured, expected, tolerance, false, comparison};
    const double diff = std::abs(measured - expected);
    switch (comparison) {
        case Comparison::absolute: c.passed = diff <= tolerance; break;
        case Comparison::relative: c.passed = diff <= tolerance * std::abs(expected); break;
        case Comparison::at_least: c.passed = measured >= expected; break;
        case Comparison::below: c.passed = measured < expected; break;
    }
    if (!std::isfinite(measured)) c.passed = false;
    return c;
}

std::vector<CheckResult> check_constants(const VerifyOptions& opts) {
    std::vector<CheckResult> out;
    const SphereConstants c2 = sphere_constants(2);
    const double c2_diag = c2.diag * opts.cdiag_scale;
    const Moments t2 = trapezoid_s1(64);
    const Moments m2 = monte_carlo_s1(opts.mc_samples, 1);
    out.push_back(make_check("C2 offdiag trapezoid", t2.offdiag, c2.offdiag, 1e-10));
    out.push_back(make_check("C2 diag trapezoid", t2.diag, c2_diag, 1e-10));
    out.push_back(make_check("C2 offdiag monte-carlo", m2.offdiag, c2.offdiag, 1e-3));
    out.push_back(make_check("C2 diag monte-carlo", m2.diag, c2_diag, 1e-3));
    out.push_back(make_check("C2 diag/offdiag trapezoid", t2.diag / t2.offdiag,
                             c2_diag / c2.offdiag, 1e-3));
    out.push_back(make_check("C2 diag/offdiag monte-carlo", m2.diag / m2.offdiag,
                             c2_diag / c2.offdiag, 1e-3));

    // S^0 = {-1, +1} with counting measure.
    const double s0 = std::pow(-1.0, 4) + std::pow(1.0, 4);
    out.push_back(make_check("C1 diag exact", s0, sphere_constants(1).diag * opts.cdiag_scale, 0.0));

    const SphereConstants c3 = sphere_constants(3);
    const Moments q3 = quadrature_s2(16, 32);
    const Moments m3 = monte_carlo_s2(opts.mc_samples, 2);
    out.push_back(make_check("C3 offdiag quadrature", q3.offdiag, c3.offdiag, 1e-8));
    out.push_back(make_check("C3 diag quadrature", q3.diag, c3.diag * opts.cdiag_scale, 1e-8));
    out.push_back(make_check("C3 offdiag monte-carlo", m3.offdiag, c3.offdiag, 1e-3));
    out.push_back(make_check("C3 diag monte-carlo", m3.diag, c3.diag * opts.cdiag_scale, 1e-3));
    return out;
}

std::vector<CheckResult> check_localization(LocalizationDiagnostics* diagnostics) {
    const int n = 257;
    const double centre = 128.0;
    const double width = 32.0;  // bump standard deviation in pixels
    const double s2 = width * width;
    const ScalarFunction bump = [=](double x, double y) {
        const double a = x - centre, b = y - centre;
        return std::exp(-0.5 * (a * a + b * b) / s2);
    };
    auto exact = [=](double x, double y) {
        const double a = x - centre, b = y - centre;
        const double e = std::exp(-0.5 * (a * a + b * b) / s2);
        return SymmetricMatrix2{e * (a * a / s2 - 1.0) / s2, e * a * b / (s2 * s2),
                                e * (b * b / s2 - 1.0) / s2};
    };
    const std::vector<double> deltas = {16.0, 8.0, 4.0, 2.0};

    ImageGrid sampled(n, n);
    for (int iy = 0; iy < n; ++iy)
        for (int ix = 0; ix < n; ++ix) sampled(ix, iy) = bump(ix, iy);

    LocalizationDiagnostics d;
    d.deltas = deltas;
    for (double delta : deltas) {
        const MollifierFamily rho{MollifierKind::ball, delta};
        double sup = 0.0, l1 = 0.0;
        for (int iy = 0; iy < n; ++iy) {
            for (int ix = 0; ix < n; ++ix) {
                const double e =
                    frob(minus(explicit_nl_hessian_at(bump, ix, iy, rho), exact(ix, iy)));
                sup = std::max(sup, e);
                l1 += e;
            }
        }
        d.grid_free_sup.push_back(sup);
        d.grid_free_l1.push_back(l1);

        const SymmetricField lattice = explicit_nl_hessian(sampled, rho);
        double lsup = 0.0, ll1 = 0.0;
        for (int iy = 0; iy < n; ++iy) {
            for (int ix = 0; ix < n; ++ix) {
                const std::size_t p = sampled.index(ix, iy);
                const double e = frob(minus({lattice.xx.raw()[p], lattice.xy.raw()[p], lattice.yy.raw()[p]},
                                            exact(ix, iy)));
                lsup = std::max(lsup, e);
                ll1 += e;
            }
        }
        d.lattice_sup.push_back(lsup);
        d.lattice_l1.push_back(ll1);
    }

    std::vector<CheckResult> out;
    for (std::size_t i = 0; i + 1 < deltas.size(); ++i) {
        const std::string pair = fmt("delta ", deltas[i]) + fmt("->", deltas[i + 1]);
        out.push_back(make_check("localization sup decreases " + pair, d.grid_free_sup[i + 1],
                                 d.grid_free_sup[i], 0.0, Comparison::below));
        out.push_back(make_check("localization L1 decreases " + pair, d.grid_free_l1[i + 1],
                                 d.grid_free_l1[i], 0.0, Comparison::below));
    }
    for (std::size_t i = 0; i < 2; ++i) {
        const std::string pair = fmt("delta ", deltas[i]) + fmt("/", deltas[i + 1]);
        out.push_back(make_check("localization sup ratio " + pair,
                                 d.grid_free_sup[i] / d.grid_free_sup[i + 1], 3.0, 0.0,
                                 Comparison::at_least));
        out.push_back(make_check("localization L1 ratio " + pair,
                                 d.grid_free_l1[i] / d.grid_free_l1[i + 1], 3.0, 0.0,
                                 Comparison::at_least));
    }

    const ScalarFunction affine = [](double x, double y) { return 0.3 + 0.002 * x - 0.001 * y; };
    for (double delta : deltas) {
        const MollifierFamily rho{MollifierKind::ball, delta};
        double worst = 0.0;
        for (int iy = 0; iy < n; iy += 16)
            for (int ix = 0; ix < n; ix += 16)
                worst = std::max(worst, frob(explicit_nl_hessian_at(affine, ix, iy, rho)));
        out.push_back(make_check(fmt("localization affine error delta ", delta), worst, 0.0, 1e-10));
    }
    if (diagnostics) *diagnostics = std::move(d);
    return out;
}

std::vector<CheckResult> check_implicit_explicit() {
    std::vector<CheckResult> out;
    const double x = 0.3, y = -0.2;
    for (const auto& f : smooth_functions()) {
        const SymmetricMatrix2 closed = implicit_on_circle(f.u, x, y, 0.5, 256);
        const SymmetricMatrix2 ls = circle_least_squares(f.u, x, y, 0.5, 256);
        out.push_back(make_check(std::string("circle closed form vs least squares ") + f.name,
                                 frob(minus(closed, ls)) / frob(ls), 0.0, 1e-8));
    }
    const ScalarFunction quad = [](double a, double b) {
        return 0.4 + a - 2.0 * b + 0.5 * (1.5 * a * a + 2.0 * 0.7 * a * b - 0.9 * b * b);
    };
    const SymmetricMatrix2 truth{1.5, 0.7, -0.9};
    out.push_back(make_check("circle closed form on quadratic",
                             frob(minus(implicit_on_circle(quad, x, y, 0.5, 256), truth)), 0.0,
                             1e-12));
    out.push_back(make_check("circle least squares on quadratic",
                             frob(minus(circle_least_squares(quad, x, y, 0.5, 256), truth)), 0.0,
                             1e-12));

    const MollifierFamily rho{MollifierKind::gaussian, 0.25};
    for (const auto& f : smooth_functions()) {
        const SymmetricMatrix2 cart = explicit_cartesian(f.u, x, y, rho, 2000);
        const SymmetricMatrix2 shells = explicit_by_shells(f.u, x, y, rho, 64, 256);
        out.push_back(make_check(std::string("explicit vs shell average ") + f.name,
                                 frob(minus(cart, shells)), 0.0, 1e-4));
    }
    return out;
}

std::vector<CheckResult> check_adjointness() {
    std::vector<CheckResult> out;
    const MollifierFamily families[] = {{MollifierKind::ball, 3.0},
                                        {MollifierKind::gaussian, 1.2},
                                        {MollifierKind::annulus, 4.0}};
    const int n = 48;
    std::mt19937_64 rng(2024);
    for (int k = 0; k < 10; ++k) {
        const MollifierFamily& rho = families[k % 3];
        const int band = static_cast<int>(std::ceil(std::max(2.0 * rho.delta, rho.radius()))) + 1;
        const ImageGrid u = compact_random(n, band, rng);
        const SymmetricField phi{compact_random(n, band, rng), compact_random(n, band, rng),
                                 compact_random(n, band, rng)};
        const SymmetricField hu = explicit_nl_hessian(u, rho);
        const double lhs = pairing(hu, phi);
        const double rhs = pairing(u, nl_divergence2(phi, rho));
        const double scale = std::sqrt(pairing(hu, hu) * pairing(phi, phi));
        out.push_back(make_check(fmt("adjointness pair ", k) + " " + to_string(rho.kind),
                                 std::abs(lhs - rhs) / scale, 0.0, 1e-10));
    }

    const MollifierFamily rho = families[0];
    const ImageGrid zero(n, n);
    std::mt19937_64 rng0(7);
    const SymmetricField phi{compact_random(n, 5, rng0), compact_random(n, 5, rng0),
                             compact_random(n, 5, rng0)};
    out.push_back(make_check("adjointness zero field lhs",
                             pairing(explicit_nl_hessian(zero, rho), phi), 0.0, 0.0));
    out.push_back(make_check("adjointness zero field rhs", pairing(zero, nl_divergence2(phi, rho)),
                             0.0, 0.0));

    const ImageGrid u = compact_random(n, 5, rng0);
    ImageGrid u2 = u;
    for (auto& v : u2.raw()) v *= 2.0;
    const double a1 = pairing(explicit_nl_hessian(u, rho), phi);
    const double a2 = pairing(explicit_nl_hessian(u2, rho), phi);
    const ImageGrid d2 = nl_divergence2(phi, rho);
    out.push_back(make_check("adjointness linearity lhs", a2 / a1, 2.0, 1e-12, Comparison::relative));
    out.push_back(make_check("adjointness linearity rhs", pairing(u2, d2) / pairing(u, d2), 2.0,
                             1e-12, Comparison::relative));
    return out;
}

std::vector<CheckResult> run_all_checks(const VerifyOptions& opts,
                                        LocalizationDiagnostics* diagnostics) {
    std::vector<CheckResult> all = check_constants(opts);
    for (auto&& part : {check_localization(diagnostics), check_implicit_explicit(),
                        check_adjointness()}) {
        all.insert(all.end(), part.begin(), part.end());
    }
    return all;
}

void write_checks_csv(std::ostream& os, const std::vector<CheckResult>& checks) {
    os << "name,measured,expected,tolerance,passed\n";
    os << std::setprecision(17);
    for (const auto& c : checks) {
        os << '"' << c.name << '"' << ',' << c.measured << ',' << c.expected << ','
           << c.tolerance << ',' << (c.passed ? "true" : "false") << '\n';
    }
}

void print_checks_table(std::ostream& os, const std::vector<CheckResult>& checks) {
    std::size_t width = 4;
    for (const auto& c : checks) width = std::max(width, c.name.size());
    const auto old = os.flags();
    os << std::left << std::setw(static_cast<int>(width)) << "name" << "  " << std::setw(14)
       << "measured" << std::setw(14) << "expected" << std::setw(12) << "tolerance"
       << "result\n";
    for (const auto& c : checks) {
        const char* rule = c.comparison == Comparison::at_least ? ">="
                           : c.comparison == Comparison::below  ? "<"
                           : c.comparison == Comparison::relative ? "rel"
                                                                  : "abs";
        os << std::left << std::setw(static_cast<int>(width)) << c.name << "  "
           << std::setw(14) << std::setprecision(6) << c.measured << std::setw(14) << c.expected
           << std::setw(12)
           << (c.comparison == Comparison::at_least || c.comparison == Comparison::below
                   ? std::string(rule)
                   : std::string(rule) + " " + fmt("", c.tolerance))
           << (c.passed ? "PASS" : "FAIL") << '\n';
    }
    os.flags(old);
}

void print_localization_diagnostics(std::ostream& os, const LocalizationDiagnostics& d) {
    os << "localization errors (grid-free polar quadrature | lattice midpoint rule)\n";
    os << "delta_px  sup_free      L1_free       sup_lattice   L1_lattice\n";
    for (std::size_t i = 0; i < d.deltas.size(); ++i) {
        os << std::left << std::setw(10) << d.deltas[i] << std::setw(14) << d.grid_free_sup[i]
           << std::setw(14) << d.grid_free_l1[i] << std::setw(14) << d.lattice_sup[i]
           << d.lattice_l1[i] << '\n';
    }
}

bool all_passed(const std::vector<CheckResult>& checks) {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

}  // namespace nlh
