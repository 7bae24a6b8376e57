#pragma once

#include <vector>

#include "nlh/image.hpp"
#include "nlh/nl_hessian.hpp"

namespace nlh {

enum class MollifierKind { ball, gaussian, annulus };

/// Gaussian mollifiers are truncated at this many standard deviations.
inline constexpr double kGaussianTruncation = 4.0;

struct LatticeTap {
    Offset offset;
    /// rho(h) * spacing^2: the quadrature weight of this lattice cell.
    double weight = 0.0;
};

/// Radial weights rho_delta with unit mass. `delta` is the ball/annulus outer
/// radius or the Gaussian standard deviation, in physical length units.
struct MollifierFamily {
    MollifierKind kind = MollifierKind::ball;
    double delta = 1.0;

    /// Support radius (the truncation radius for Gaussians).
    double radius() const;
    /// Continuous density rho(r), normalised to unit mass on R^2.
    double density(double r) const;
    /// Inner radius of the support (zero except for the annulus).
    double inner_radius() const;

    /// Midpoint quadrature weights over lattice offsets h != 0, normalised so
    /// that they sum to exactly one. Throws "mollifier under-resolved" when
    /// delta is smaller than one grid spacing.
    std::vector<LatticeTap> lattice_taps(double spacing) const;
};

const char* to_string(MollifierKind kind);
MollifierKind mollifier_kind_from_string(const std::string& name);

/// H_n u(x) = 4 sum_h w(h) [u(x+h) - 2u(x) + u(x-h)]/|h|^2 (hh'/|h|^2 - I/4)
/// with u extended by even reflection across the border.
SymmetricField explicit_nl_hessian(const ImageGrid& u, const MollifierFamily& rho);

/// Second-order non-local divergence with the same quadrature:
/// D2 phi(x) = 4 sum_h w(h) [phi(x+h) - 2 phi(x) + phi(x-h)] : (hh'/|h|^2 - I/4) / |h|^2.
ImageGrid nl_divergence2(const SymmetricField& phi, const MollifierFamily& rho);

/// Matrix pairing sum_x A(x) : B(x), counting the off-diagonal twice.
double pairing(const SymmetricField& a, const SymmetricField& b);
double pairing(const ImageGrid& a, const ImageGrid& b);

/// Polar product rule for grid-free evaluation: Gauss-Legendre in the radius,
/// trapezoidal over the half circle (the integrand is even in h).
struct PolarRule {
    int radial = 24;
    int angular = 64;
};

/// Explicit non-local Hessian of an analytic function at (x, y).
SymmetricMatrix2 explicit_nl_hessian_at(const ScalarFunction& u, double x, double y,
                                        const MollifierFamily& rho, const PolarRule& rule = {});

/// Gauss-Legendre nodes and weights on [a, b].
void gauss_legendre(int n, double a, double b, std::vector<double>& nodes,
                    std::vector<double>& weights);

}  // namespace nlh
