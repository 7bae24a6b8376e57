#include "nlh/nl_hessian.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <vector>

namespace nlh {

namespace {

std::string empty_message(PixelIndex p) {
    std::ostringstream os;
    os << "empty neighbourhood at pixel (" << p.ix << "," << p.iy << ")";
    return os.str();
}

struct NormalSystem {
    Eigen::Matrix<double, Eigen::Dynamic, 5> design;
    Eigen::VectorXd weights;
    Eigen::Matrix<double, 5, 5> normal;
    double condition = 1.0;
    bool ridged = false;
};

NormalSystem build_normal_system(std::span<const NeighborEntry> neighbors, double spacing,
                                 double ridge) {
    const auto k = static_cast<Eigen::Index>(neighbors.size());
    NormalSystem sys;
    sys.design.resize(k, 5);
    sys.weights.resize(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        const auto& e = neighbors[static_cast<std::size_t>(i)];
        sys.design.row(i) = quadratic_design_row(e.offset.dx * spacing, e.offset.dy * spacing);
        sys.weights(i) = e.weight;
    }
    sys.normal = sys.design.transpose() * sys.weights.asDiagonal() * sys.design;

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 5, 5>> eig(sys.normal,
                                                                    Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues()(0);
    const double hi = eig.eigenvalues()(4);
    sys.condition = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    if (sys.condition > kRidgeConditionThreshold) {
        const double shift = ridge * sys.normal.trace() / 5.0;
        sys.normal.diagonal().array() += shift;
        sys.ridged = true;
    }
    return sys;
}

}  // namespace

EmptyNeighborhoodError::EmptyNeighborhoodError(PixelIndex pixel)
    : Error(empty_message(pixel)), pixel_(pixel) {}

Eigen::Matrix<double, 5, 1> quadratic_design_row(double z1, double z2) {
    Eigen::Matrix<double, 5, 1> a;
    a << z1, z2, 0.5 * z1 * z1, z1 * z2, 0.5 * z2 * z2;
    return a;
}

FitStencil fit_stencil(std::span<const NeighborEntry> neighbors, double spacing, double ridge) {
    if (neighbors.empty()) throw Error("fit_stencil: empty neighbourhood");
    const NormalSystem sys = build_normal_system(neighbors, spacing, ridge);
    FitStencil out;
    out.condition = sys.condition;
    out.ridged = sys.ridged;
    const Eigen::Matrix<double, 5, Eigen::Dynamic> rhs =
        sys.design.transpose() * sys.weights.asDiagonal();
    out.coefficients = sys.normal.ldlt().solve(rhs);
    return out;
}

QuadraticFit fit_quadratic(const ImageGrid& u, PixelIndex x, const NeighborhoodWeights& nbhd,
                           double ridge) {
    if (!u.contains(x)) throw Error("fit_quadratic: pixel outside grid");
    const auto neighbors = nbhd[u.index(x)];
    if (neighbors.empty()) throw EmptyNeighborhoodError(x);

    const NormalSystem sys = build_normal_system(neighbors, u.spacing(), ridge);
    const double ux = u(x.ix, x.iy);
    Eigen::VectorXd diffs(static_cast<Eigen::Index>(neighbors.size()));
    for (std::size_t i = 0; i < neighbors.size(); ++i) {
        const int jx = x.ix + neighbors[i].offset.dx;
        const int jy = x.iy + neighbors[i].offset.dy;
        if (!u.contains(jx, jy)) throw Error("fit_quadratic: neighbour outside grid");
        diffs(static_cast<Eigen::Index>(i)) = u(jx, jy) - ux;
    }
    const Eigen::Matrix<double, 5, 1> rhs =
        sys.design.transpose() * sys.weights.asDiagonal() * diffs;
    const Eigen::Matrix<double, 5, 1> p = sys.normal.ldlt().solve(rhs);

    QuadraticFit fit;
    fit.gradient = p.head<2>();
    fit.hessian = {p(2), p(3), p(4)};
    const Eigen::VectorXd r = diffs - sys.design * p;
    fit.residual = 0.5 * r.cwiseProduct(r).dot(sys.weights);
    fit.condition = sys.condition;
    fit.ridged = sys.ridged;
    return fit;
}

SymmetricField NlHessianOperator::apply(const ImageGrid& u) const {
    if (u.width() != width_ || u.height() != height_) {
        throw Error("NlHessianOperator::apply: dimension mismatch");
    }
    const Eigen::Map<const Eigen::VectorXd> uv(u.raw().data(),
                                               static_cast<Eigen::Index>(u.size()));
    const Eigen::VectorXd h = hessian_ * uv;
    SymmetricField out{ImageGrid(width_, height_), ImageGrid(width_, height_),
                       ImageGrid(width_, height_)};
    for (std::size_t p = 0; p < pixel_count(); ++p) {
        out.xx[p] = h(static_cast<Eigen::Index>(3 * p));
        out.xy[p] = h(static_cast<Eigen::Index>(3 * p + 1));
        out.yy[p] = h(static_cast<Eigen::Index>(3 * p + 2));
    }
    return out;
}

VectorField NlHessianOperator::apply_gradient(const ImageGrid& u) const {
    if (u.width() != width_ || u.height() != height_) {
        throw Error("NlHessianOperator::apply_gradient: dimension mismatch");
    }
    const Eigen::Map<const Eigen::VectorXd> uv(u.raw().data(),
                                               static_cast<Eigen::Index>(u.size()));
    const Eigen::VectorXd g = gradient_ * uv;
    VectorField out{ImageGrid(width_, height_), ImageGrid(width_, height_)};
    for (std::size_t p = 0; p < pixel_count(); ++p) {
        out.x[p] = g(static_cast<Eigen::Index>(2 * p));
        out.y[p] = g(static_cast<Eigen::Index>(2 * p + 1));
    }
    return out;
}

void NlHessianOperator::dump_triplets(std::ostream& os) const {
    os.precision(17);
    for (Eigen::Index r = 0; r < hessian_.outerSize(); ++r) {
        for (SparseRows::InnerIterator it(hessian_, r); it; ++it) {
            os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
        }
    }
}

NlHessianOperator assemble_operator(const NeighborhoodWeights& nbhd,
                                    const std::optional<ImageGrid>& omega, double ridge,
                                    double spacing) {
    const int w = nbhd.width();
    const int h = nbhd.height();
    const std::size_t n = nbhd.pixel_count();
    if (n != static_cast<std::size_t>(w) * h) {
        throw Error("assemble_operator: neighbourhoods do not cover the grid");
    }
    if (omega && (omega->width() != w || omega->height() != h)) {
        throw Error("assemble_operator: omega dimension mismatch");
    }

    std::vector<Eigen::Triplet<double>> hess;
    std::vector<Eigen::Triplet<double>> grad;
    hess.reserve(3 * n * (nbhd.m() + 1));
    grad.reserve(2 * n * (nbhd.m() + 1));

    NlHessianOperator op;
    op.width_ = w;
    op.height_ = h;
    for (std::size_t p = 0; p < n; ++p) {
        const auto neighbors = nbhd[p];
        const PixelIndex x{static_cast<int>(p % static_cast<std::size_t>(w)),
                           static_cast<int>(p / static_cast<std::size_t>(w))};
        if (neighbors.empty()) throw EmptyNeighborhoodError(x);
        const FitStencil st = fit_stencil(neighbors, spacing, ridge);
        if (st.ridged) ++op.ridged_pixels_;
        const double scale = omega ? (*omega)[p] : 1.0;

        for (int comp = 0; comp < 5; ++comp) {
            const bool is_hessian = comp >= 2;
            const auto row = static_cast<Eigen::Index>(is_hessian ? 3 * p + (comp - 2)
                                                                  : 2 * p + comp);
            auto& out = is_hessian ? hess : grad;
            double centre = 0.0;
            for (std::size_t k = 0; k < neighbors.size(); ++k) {
                const double c = st.coefficients(comp, static_cast<Eigen::Index>(k));
                centre -= c;
                const auto col = static_cast<Eigen::Index>(
                    (x.iy + neighbors[k].offset.dy) * w + x.ix + neighbors[k].offset.dx);
                out.emplace_back(row, col, scale * c);
            }
            out.emplace_back(row, static_cast<Eigen::Index>(p), scale * centre);
        }
    }
    const auto rows_n = static_cast<Eigen::Index>(n);
    op.hessian_.resize(3 * rows_n, rows_n);
    op.hessian_.setFromTriplets(hess.begin(), hess.end());
    op.gradient_.resize(2 * rows_n, rows_n);
    op.gradient_.setFromTriplets(grad.begin(), grad.end());
    op.hessian_.makeCompressed();
    op.gradient_.makeCompressed();
    op.omega_ = omega;
    return op;
}

SphereConstants sphere_constants(int dimension) {
    double area = 0.0;
    switch (dimension) {
        case 1: area = 2.0; break;
        case 2: area = 2.0 * std::numbers::pi; break;
        case 3: area = 4.0 * std::numbers::pi; break;
        default: {
            std::ostringstream os;
            os << "sphere_constants: unsupported dimension " << dimension;
            throw Error(os.str());
        }
    }
    const double base = area / (dimension * (dimension + 2.0));
    return {dimension, base, 3.0 * base};
}

double bilinear(const ImageGrid& u, double px, double py) {
    const int w = u.width();
    const int h = u.height();
    if (px < 0.0 || py < 0.0 || px > w - 1 || py > h - 1) {
        throw Error("bilinear: sample outside grid");
    }
    const int x0 = std::min(static_cast<int>(px), std::max(w - 2, 0));
    const int y0 = std::min(static_cast<int>(py), std::max(h - 2, 0));
    const int x1 = std::min(x0 + 1, w - 1);
    const int y1 = std::min(y0 + 1, h - 1);
    const double fx = px - x0;
    const double fy = py - y0;
    return (1 - fx) * (1 - fy) * u(x0, y0) + fx * (1 - fy) * u(x1, y0) +
           (1 - fx) * fy * u(x0, y1) + fx * fy * u(x1, y1);
}

namespace {

template <typename Sampler>
SymmetricMatrix2 circle_closed_form(Sampler&& second_difference, double h, int samples) {
    if (samples < 8) throw Error("implicit_on_circle: at least 8 samples required");
    if (!(h > 0.0)) throw Error("implicit_on_circle: radius must be positive");
    const double c12 = sphere_constants(2).offdiag;
    const double dtheta = 2.0 * std::numbers::pi / samples;
    SymmetricMatrix2 acc;
    for (int k = 0; k < samples; ++k) {
        const double theta = k * dtheta;
        const double n1 = std::cos(theta);
        const double n2 = std::sin(theta);
        const double d2 = second_difference(h * n1, h * n2) / (h * h);
        acc.xx += d2 * (n1 * n1 - 0.25);
        acc.xy += d2 * (n1 * n2);
        acc.yy += d2 * (n2 * n2 - 0.25);
    }
    // Arc-length weight h*dtheta cancels the h^{-1} prefactor.
    const double scale = 0.5 / c12 * dtheta;
    return {scale * acc.xx, scale * acc.xy, scale * acc.yy};
}

}  // namespace

SymmetricMatrix2 implicit_on_circle(const ScalarFunction& u, double x, double y, double h,
                                    int samples) {
    const double ux = u(x, y);
    return circle_closed_form(
        [&](double z1, double z2) { return u(x + z1, y + z2) - 2.0 * ux + u(x - z1, y - z2); },
        h, samples);
}

SymmetricMatrix2 implicit_on_circle(const ImageGrid& u, PixelIndex x, double h, int samples) {
    if (!u.contains(x)) throw Error("implicit_on_circle: pixel outside grid");
    if (x.ix - h < 0.0 || x.iy - h < 0.0 || x.ix + h > u.width() - 1 ||
        x.iy + h > u.height() - 1) {
        throw Error("implicit_on_circle: circle exits the grid");
    }
    const double ux = u(x.ix, x.iy);
    const double s = u.spacing();
    // Offsets are sampled in pixel units but the result is per physical length^2.
    const SymmetricMatrix2 px = circle_closed_form(
        [&](double z1, double z2) {
            return bilinear(u, x.ix + z1, x.iy + z2) - 2.0 * ux + bilinear(u, x.ix - z1, x.iy - z2);
        },
        h, samples);
    const double inv = 1.0 / (s * s);
    return {px.xx * inv, px.xy * inv, px.yy * inv};
}

}  // namespace nlh
