#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cmath>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>

#include "nlh/eikonal.hpp"
#include "nlh/image.hpp"

namespace nlh {

/// Normal matrices with a condition estimate above this get a ridge term.
inline constexpr double kRidgeConditionThreshold = 1e8;
/// Default ridge, relative to trace(normal matrix)/5.
inline constexpr double kDefaultRidge = 1e-8;

struct SymmetricMatrix2 {
    double xx = 0.0;
    double xy = 0.0;
    double yy = 0.0;
};

/// |H| = sqrt(hxx^2 + 2 hxy^2 + hyy^2), the Frobenius norm of the full matrix.
inline double frobenius(double xx, double xy, double yy) {
    return std::sqrt(xx * xx + 2.0 * xy * xy + yy * yy);
}

/// Minimiser (G, H) of 1/2 sum_z w(z) (u(x+z) - u(x) - G.z - z'Hz/2)^2 over a
/// neighbourhood of x.
struct QuadraticFit {
    Eigen::Vector2d gradient = Eigen::Vector2d::Zero();
    SymmetricMatrix2 hessian;
    double residual = 0.0;
    double condition = 1.0;
    bool ridged = false;
};

/// Raised when a pixel has no neighbours to fit.
class EmptyNeighborhoodError : public Error {
public:
    explicit EmptyNeighborhoodError(PixelIndex pixel);
    PixelIndex pixel() const { return pixel_; }

private:
    PixelIndex pixel_;
};

/// Design row [z1, z2, z1^2/2, z1 z2, z2^2/2] for a physical offset z.
Eigen::Matrix<double, 5, 1> quadratic_design_row(double z1, double z2);

/// Linear map from the neighbour differences u(x+z_k) - u(x) to the five fit
/// parameters (g1, g2, hxx, hxy, hyy), one column per neighbour.
struct FitStencil {
    Eigen::Matrix<double, 5, Eigen::Dynamic> coefficients;
    double condition = 1.0;
    bool ridged = false;
};

/// `ridge` scales the trace(normal)/5 diagonal shift applied when the
/// normal matrix condition exceeds kRidgeConditionThreshold.
FitStencil fit_stencil(std::span<const NeighborEntry> neighbors, double spacing, double ridge);

QuadraticFit fit_quadratic(const ImageGrid& u, PixelIndex x, const NeighborhoodWeights& nbhd,
                           double ridge = kDefaultRidge);

/// Pre-solved implicit non-local Hessian H'_u = W u as a sparse operator.
class NlHessianOperator {
public:
    using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

    /// 3N x N, rows (hxx, hxy, hyy) per pixel.
    const SparseRows& hessian_rows() const { return hessian_; }
    /// 2N x N, rows (gx, gy) per pixel.
    const SparseRows& gradient_rows() const { return gradient_; }
    const std::optional<ImageGrid>& omega() const { return omega_; }

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }
    std::size_t ridged_pixels() const { return ridged_pixels_; }

    SymmetricField apply(const ImageGrid& u) const;
    VectorField apply_gradient(const ImageGrid& u) const;

    /// Coordinate triplets "row col value", one per line.
    void dump_triplets(std::ostream& os) const;

private:
    friend NlHessianOperator assemble_operator(const NeighborhoodWeights&,
                                               const std::optional<ImageGrid>&, double, double);
    int width_ = 0;
    int height_ = 0;
    SparseRows hessian_;
    SparseRows gradient_;
    std::optional<ImageGrid> omega_;
    std::size_t ridged_pixels_ = 0;
};

/// Extracts the per-pixel linear fit into sparse rows. When omega is given,
/// every row of pixel x is scaled by omega(x).
NlHessianOperator assemble_operator(const NeighborhoodWeights& nbhd,
                                    const std::optional<ImageGrid>& omega,
                                    double ridge = kDefaultRidge, double spacing = 1.0);

/// Moments C_ij = integral over S^{N-1} of nu_i^2 nu_j^2.
struct SphereConstants {
    int dimension = 0;
    double offdiag = 0.0;
    double diag = 0.0;
};

SphereConstants sphere_constants(int dimension);

/// Analytic scalar function u(x, y).
using ScalarFunction = std::function<double(double, double)>;

/// Closed-form Hessian of the circle least-squares problem,
/// (1/2) C12^{-1} h^{-1} integral over the circle of radius h of
/// [(u(x+z) - 2u(x) + u(x-z))/|z|^2] (zz'/|z|^2 - I/4), by the trapezoidal
/// rule on `samples` equally spaced points.
SymmetricMatrix2 implicit_on_circle(const ScalarFunction& u, double x, double y, double h,
                                    int samples);

/// Same on a lattice image, with bilinear interpolation off the lattice.
/// x and h are in pixel units.
SymmetricMatrix2 implicit_on_circle(const ImageGrid& u, PixelIndex x, double h, int samples);

double bilinear(const ImageGrid& u, double px, double py);

}  // namespace nlh
