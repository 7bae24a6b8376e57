#include "nlh/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>

#include "json.hpp"

namespace nlh {

namespace {

using SparseRM = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<double>;

const double kSqrt2 = std::numbers::sqrt2;

/// Saddle-point problem min_x F(Kx) + G(x). Rows [0, l1_start) of K are split
/// into contiguous groups projected onto unit Euclidean balls; rows from
/// l1_start on pair one-to-one with the first n_u primal entries and carry
/// the L1 data term.
struct Problem {
    SparseRM k;
    std::vector<Eigen::Index> group_start{0};
    Eigen::Index l1_start = -1;
    Eigen::Index n_u = 0;
    int data_p = 1;
    Eigen::VectorXd g;
    Eigen::VectorXd x0;
};

class RowBuilder {
public:
    Eigen::Index row() const { return row_; }
    void add(Eigen::Index col, double v) { triplets_.emplace_back(row_, col, v); }
    void next_row() { ++row_; }
    /// Drops the current row if it received no coefficients.
    void close_row(bool used) {
        if (used) ++row_;
    }
    void close_group(Problem& p) const {
        if (p.group_start.back() != row_) p.group_start.push_back(row_);
    }
    SparseRM finish(Eigen::Index cols) {
        SparseRM k(row_, cols);
        k.setFromTriplets(triplets_.begin(), triplets_.end());
        return k;
    }

private:
    Eigen::Index row_ = 0;
    std::vector<Triplet> triplets_;
};

Eigen::VectorXd to_vector(const ImageGrid& img) {
    return Eigen::Map<const Eigen::VectorXd>(img.raw().data(),
                                             static_cast<Eigen::Index>(img.size()));
}

ImageGrid to_image(const Eigen::VectorXd& v, const ImageGrid& like, Eigen::Index offset = 0) {
    ImageGrid out(like.width(), like.height(), 0.0, like.spacing());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = v(offset + static_cast<Eigen::Index>(i));
    return out;
}

/// Appends the identity block for the L1 data term.
SparseRM with_identity_block(const SparseRM& reg, Eigen::Index n_u, Eigen::Index cols) {
    std::vector<Triplet> t;
    t.reserve(static_cast<std::size_t>(reg.nonZeros() + n_u));
    for (Eigen::Index r = 0; r < reg.outerSize(); ++r) {
        for (SparseRM::InnerIterator it(reg, r); it; ++it) t.emplace_back(r, it.col(), it.value());
    }
    for (Eigen::Index i = 0; i < n_u; ++i) t.emplace_back(reg.rows() + i, i, 1.0);
    SparseRM k(reg.rows() + n_u, cols);
    k.setFromTriplets(t.begin(), t.end());
    return k;
}

void finalize_data_term(Problem& p, const ImageGrid& g, int data_p) {
    p.data_p = data_p;
    p.g = to_vector(g);
    p.n_u = static_cast<Eigen::Index>(g.size());
    if (data_p == 1) {
        p.l1_start = p.k.rows();
        p.k = with_identity_block(p.k, p.n_u, p.k.cols());
    }
}

double problem_energy(const Problem& p, const Eigen::VectorXd& x, const Eigen::VectorXd& kx) {
    double e = 0.0;
    for (std::size_t gi = 0; gi + 1 < p.group_start.size(); ++gi) {
        const Eigen::Index a = p.group_start[gi], b = p.group_start[gi + 1];
        e += kx.segment(a, b - a).norm();
    }
    const auto u = x.head(p.n_u);
    if (p.data_p == 2) {
        e += (u - p.g).squaredNorm();
    } else {
        e += (u - p.g).lpNorm<1>();
    }
    return e;
}

void step_sizes(const Problem& p, StepRule rule, double norm, Eigen::VectorXd& tau,
                Eigen::VectorXd& sigma) {
    const Eigen::Index m = p.k.rows(), n = p.k.cols();
    if (rule == StepRule::scalar) {
        tau = Eigen::VectorXd::Constant(n, 0.99 / norm);
        sigma = Eigen::VectorXd::Constant(m, 0.99 / norm);
        return;
    }
    Eigen::VectorXd row_abs = Eigen::VectorXd::Zero(m), col_abs = Eigen::VectorXd::Zero(n);
    for (Eigen::Index r = 0; r < m; ++r) {
        for (SparseRM::InnerIterator it(p.k, r); it; ++it) {
            row_abs(r) += std::abs(it.value());
            col_abs(it.col()) += std::abs(it.value());
        }
    }
    // Untouched columns never move; any finite step works for them.
    tau = col_abs.unaryExpr([](double c) { return c > 0.0 ? 1.0 / c : 1.0; });
    sigma = row_abs.unaryExpr([](double r) { return r > 0.0 ? 1.0 / r : 1.0; });
    for (std::size_t gi = 0; gi + 1 < p.group_start.size(); ++gi) {
        const Eigen::Index a = p.group_start[gi], b = p.group_start[gi + 1];
        sigma.segment(a, b - a).setConstant(sigma.segment(a, b - a).minCoeff());
    }
}

Solution run_chambolle_pock(const Problem& p, const ImageGrid& like, const SolverConfig& cfg,
                            bool has_w) {
    const auto start = std::chrono::steady_clock::now();
    Solution sol;
    SolveReport& rep = sol.report;

    const OperatorNorm kn = estimate_operator_norm(p.k, cfg.norm_power_iters);
    rep.operator_norm = kn.norm;

    Eigen::VectorXd x = p.x0;
    if (kn.norm == 0.0) {
        // Zero operator: the data term alone is minimised by g.
        x.head(p.n_u) = p.g;
        rep.converged = true;
    } else {
        Eigen::VectorXd tau0, sigma0;
        step_sizes(p, cfg.steps, kn.norm, tau0, sigma0);
        const SparseRM kt = p.k.transpose();
        // Primal weight: tau = tau0 / omega, sigma = sigma0 * omega keeps tau*sigma
        // and hence the step condition unchanged.
        double omega = 1.0;
        Eigen::VectorXd tau = tau0, sigma = sigma0;
        const double range = std::max(p.g.maxCoeff() - p.g.minCoeff(), 1e-12);

        // z -> T(z): x+ = prox_G(x - tau K'y), y+ = prox_F*(y + sigma K(x+ + theta (x+ - x))).
        Eigen::VectorXd xbar(x.size());
        auto step = [&](const Eigen::VectorXd& xin, const Eigen::VectorXd& yin, Eigen::VectorXd& xo,
                        Eigen::VectorXd& yo) {
            xo = xin - tau.cwiseProduct(kt * yin);
            if (p.data_p == 2) {
                const auto tu = tau.head(p.n_u).array();
                xo.head(p.n_u) =
                    ((xo.head(p.n_u).array() + 2.0 * tu * p.g.array()) / (1.0 + 2.0 * tu)).matrix();
            }
            xbar = xo + cfg.theta * (xo - xin);
            yo = yin + sigma.cwiseProduct(p.k * xbar);
            for (std::size_t gi = 0; gi + 1 < p.group_start.size(); ++gi) {
                const Eigen::Index a = p.group_start[gi], b = p.group_start[gi + 1];
                auto seg = yo.segment(a, b - a);
                const double n = seg.norm();
                if (n > 1.0) seg /= n;
            }
            if (p.l1_start >= 0) {
                auto q = yo.segment(p.l1_start, p.n_u);
                q = (q - sigma.segment(p.l1_start, p.n_u).cwiseProduct(p.g))
                        .cwiseMax(-1.0)
                        .cwiseMin(1.0);
            }
        };
        // Fixed-point residual |z - T(z)| in the metric that makes T nonexpansive.
        Eigen::VectorXd xt, yt;
        auto residual = [&](const Eigen::VectorXd& xin, const Eigen::VectorXd& yin) {
            step(xin, yin, xt, yt);
            const Eigen::VectorXd dx = xt - xin, dy = yt - yin;
            const double v = dx.cwiseQuotient(tau).dot(dx) - 2.0 * dy.dot(p.k * dx) +
                             dy.cwiseQuotient(sigma).dot(dy);
            return std::sqrt(std::max(v, 0.0));
        };

        Eigen::VectorXd y = Eigen::VectorXd::Zero(p.k.rows());
        Eigen::VectorXd xn(x.size()), yn(y.size());
        Eigen::VectorXd x_sum = Eigen::VectorXd::Zero(x.size());
        Eigen::VectorXd y_sum = Eigen::VectorXd::Zero(y.size());
        Eigen::VectorXd x_anchor = x, y_anchor = y;
        double r_anchor = cfg.restarts ? residual(x, y) : 0.0;
        double r_last_candidate = INFINITY;
        int epoch_start = 0, epoch_len = 0;
        double e_prev = INFINITY;

        for (int it = 1; it <= cfg.max_iters; ++it) {
            step(x, y, xn, yn);
            const double du = (xn.head(p.n_u) - x.head(p.n_u)).lpNorm<Eigen::Infinity>() / range;
            x.swap(xn);
            y.swap(yn);
            rep.iterations_run = it;

            if (cfg.restarts) {
                x_sum += x;
                y_sum += y;
                ++epoch_len;
            }
            if (cfg.restarts && epoch_len % cfg.restart_check_every == 0) {
                const Eigen::VectorXd xa = x_sum / epoch_len, ya = y_sum / epoch_len;
                const double r_avg = residual(xa, ya);
                const double r_cur = residual(x, y);
                const double r_c = std::min(r_avg, r_cur);
                const bool restart = r_c <= 0.2 * r_anchor ||
                                     (r_c <= 0.8 * r_anchor && r_c > r_last_candidate) ||
                                     it - epoch_start >= 0.36 * it;
                r_last_candidate = r_c;
                if (restart) {
                    if (r_avg < r_cur) {
                        x = xa;
                        y = ya;
                    }
                    const double dx = (x - x_anchor).norm(), dy = (y - y_anchor).norm();
                    if (dx > 1e-10 && dy > 1e-10) {
                        omega = std::sqrt(omega * dy / dx);
                        tau = tau0 / omega;
                        sigma = sigma0 * omega;
                    }
                    x_anchor = x;
                    y_anchor = y;
                    r_anchor = residual(x, y);
                    r_last_candidate = INFINITY;
                    x_sum.setZero();
                    y_sum.setZero();
                    epoch_len = 0;
                    epoch_start = it;
                    ++rep.restarts;
                }
            }

            if (it % cfg.check_every == 0 || it == cfg.max_iters) {
                if (!x.allFinite() || !y.allFinite()) {
                    throw NumericalError("non-finite iterate at iteration " + std::to_string(it));
                }
                const Eigen::VectorXd kx = p.k * x;
                const double e = problem_energy(p, x, kx);
                rep.energy_trace.push_back({it, e});
                // du is relative to the data range, so the test is shift-invariant.
                const double de = std::abs(e - e_prev) / std::max(std::abs(e), 1e-300);
                e_prev = e;
                if (du < cfg.tol && de < cfg.tol) {
                    rep.converged = true;
                    break;
                }
            }
        }
        rep.primal_weight = omega;
    }

    sol.u = to_image(x, like);
    if (has_w) {
        sol.w = VectorField{to_image(x, like, p.n_u), to_image(x, like, 2 * p.n_u)};
    }
    Eigen::VectorXd kx = p.k * x;
    rep.final_energy = problem_energy(p, x, kx);
    if (rep.energy_trace.empty() || rep.energy_trace.back().iter != rep.iterations_run) {
        rep.energy_trace.push_back({rep.iterations_run, rep.final_energy});
    }
    rep.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return sol;
}

void validate_config(const SolverConfig& cfg) {
    if (cfg.max_iters < 1) throw Error("solver: max_iters must be >= 1");
    if (!(cfg.tol > 0.0)) throw Error("solver: tol must be positive");
    if (!(cfg.theta >= 0.0 && cfg.theta <= 1.0)) throw Error("solver: theta must lie in [0, 1]");
    if (cfg.norm_power_iters < 50) throw Error("solver: norm_power_iters must be >= 50");
    if (cfg.check_every < 1) throw Error("solver: check_every must be >= 1");
    if (cfg.restart_check_every < 1) throw Error("solver: restart_check_every must be >= 1");
}

ImageGrid prepare_input(const ImageGrid& g, const EnergySpec& spec) {
    g.require_finite("solver input");
    return spec.clamp_input ? clamp01(g) : g;
}

// ---- baseline stencils, all Neumann: a difference exists only where its
// stencil fits inside the grid ----

Problem tv_problem(const ImageGrid& g, double alpha) {
    const int w = g.width(), h = g.height();
    const double s = alpha / g.spacing();
    Problem p;
    RowBuilder rb;
    for (int iy = 0; iy < h; ++iy) {
        for (int ix = 0; ix < w; ++ix) {
            const auto c = static_cast<Eigen::Index>(g.index(ix, iy));
            if (ix + 1 < w) {
                rb.add(c + 1, s);
                rb.add(c, -s);
                rb.next_row();
            }
            if (iy + 1 < h) {
                rb.add(c + w, s);
                rb.add(c, -s);
                rb.next_row();
            }
            rb.close_group(p);
        }
    }
    p.k = rb.finish(static_cast<Eigen::Index>(g.size()));
    return p;
}

Problem tv2_problem(const ImageGrid& g, double alpha) {
    const int w = g.width(), h = g.height();
    const double s = alpha / (g.spacing() * g.spacing());
    Problem p;
    RowBuilder rb;
    for (int iy = 0; iy < h; ++iy) {
        for (int ix = 0; ix < w; ++ix) {
            const auto c = static_cast<Eigen::Index>(g.index(ix, iy));
            if (ix >= 1 && ix + 1 < w) {
                rb.add(c - 1, s);
                rb.add(c, -2 * s);
                rb.add(c + 1, s);
                rb.next_row();
            }
            if (ix + 1 < w && iy + 1 < h) {
                const double m = kSqrt2 * s;
                rb.add(c, m);
                rb.add(c + 1, -m);
                rb.add(c + w, -m);
                rb.add(c + w + 1, m);
                rb.next_row();
            }
            if (iy >= 1 && iy + 1 < h) {
                rb.add(c - w, s);
                rb.add(c, -2 * s);
                rb.add(c + w, s);
                rb.next_row();
            }
            rb.close_group(p);
        }
    }
    p.k = rb.finish(static_cast<Eigen::Index>(g.size()));
    return p;
}

/// Primal layout [u, wx, wy], each of size W*H.
Problem tgv2_problem(const ImageGrid& g, double alpha0, double alpha1) {
    const int w = g.width(), h = g.height();
    const auto n = static_cast<Eigen::Index>(g.size());
    const double s1 = alpha1 / g.spacing();
    const double s0 = alpha0 / g.spacing();
    Problem p;
    RowBuilder rb;
    for (int iy = 0; iy < h; ++iy) {
        for (int ix = 0; ix < w; ++ix) {
            const auto c = static_cast<Eigen::Index>(g.index(ix, iy));
            if (ix + 1 < w) {
                rb.add(c + 1, s1);
                rb.add(c, -s1);
                rb.add(n + c, -alpha1);
                rb.next_row();
            }
            if (iy + 1 < h) {
                rb.add(c + w, s1);
                rb.add(c, -s1);
                rb.add(2 * n + c, -alpha1);
                rb.next_row();
            }
            rb.close_group(p);
        }
    }
    for (int iy = 0; iy < h; ++iy) {
        for (int ix = 0; ix < w; ++ix) {
            const auto c = static_cast<Eigen::Index>(g.index(ix, iy));
            if (ix + 2 < w) {
                rb.add(n + c + 1, s0);
                rb.add(n + c, -s0);
                rb.next_row();
            }
            if (ix + 1 < w && iy + 1 < h) {
                // sqrt(2) * (dy wx + dx wy) / 2
                const double m = 0.5 * kSqrt2 * s0;
                rb.add(n + c + w, m);
                rb.add(n + c, -m);
                rb.add(2 * n + c + 1, m);
                rb.add(2 * n + c, -m);
                rb.next_row();
            }
            if (iy + 2 < h) {
                rb.add(2 * n + c + w, s0);
                rb.add(2 * n + c, -s0);
                rb.next_row();
            }
            rb.close_group(p);
        }
    }
    p.k = rb.finish(3 * n);
    return p;
}

/// Staggered forward differences of g, the w that zeroes the first TGV term.
VectorField staggered_gradient(const ImageGrid& g) {
    const int w = g.width(), h = g.height();
    VectorField d{ImageGrid(w, h, 0.0, g.spacing()), ImageGrid(w, h, 0.0, g.spacing())};
    for (int iy = 0; iy < h; ++iy) {
        for (int ix = 0; ix < w; ++ix) {
            if (ix + 1 < w) d.x(ix, iy) = (g(ix + 1, iy) - g(ix, iy)) / g.spacing();
            if (iy + 1 < h) d.y(ix, iy) = (g(ix, iy + 1) - g(ix, iy)) / g.spacing();
        }
    }
    return d;
}

double data_energy(const ImageGrid& u, const ImageGrid& g, int p) {
    double e = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double d = u[i] - g[i];
        e += p == 2 ? d * d : std::abs(d);
    }
    return e;
}

}  // namespace

const char* to_string(Regularizer r) {
    switch (r) {
        case Regularizer::nl_hessian: return "nlh";
        case Regularizer::tv: return "tv";
        case Regularizer::tv2: return "tv2";
        case Regularizer::tgv2: return "tgv2";
    }
    return "?";
}

Regularizer regularizer_from_string(const std::string& name) {
    if (name == "nlh") return Regularizer::nl_hessian;
    if (name == "tv") return Regularizer::tv;
    if (name == "tv2") return Regularizer::tv2;
    if (name == "tgv2") return Regularizer::tgv2;
    throw Error("unknown regularizer '" + name + "'");
}

void EnergySpec::validate() const {
    if (data_p != 1 && data_p != 2) throw Error("energy: data_p must be 1 or 2");
    if (regularizer == Regularizer::tgv2) {
        if (!(alpha0 > 0.0) || !(alpha1 > 0.0)) {
            throw Error("energy: tgv2 requires alpha0 > 0 and alpha1 > 0");
        }
    } else if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
        throw Error("energy: alpha must be non-negative");
    }
    if (regularizer == Regularizer::nl_hessian && !op) {
        throw Error("energy: nl_hessian regularizer requires an assembled operator");
    }
}

std::string SolveReport::to_json_line(bool include_timing) const {
    nlohmann::json trace = nlohmann::json::array();
    for (const auto& s : energy_trace) trace.push_back({s.iter, s.energy});
    nlohmann::json j = {{"iterations_run", iterations_run}, {"final_energy", final_energy},
                        {"converged", converged},           {"operator_norm", operator_norm},
                        {"restarts", restarts},             {"primal_weight", primal_weight},
                        {"energy_trace", trace}};
    if (include_timing) j["wall_time"] = wall_time;
    return j.dump();
}

void SolveReport::write_trace_csv(std::ostream& os) const {
    os << "iter,energy\n";
    os.precision(17);
    for (const auto& s : energy_trace) os << s.iter << ',' << s.energy << '\n';
}

double energy(const ImageGrid& u, const ImageGrid& g, const EnergySpec& spec) {
    spec.validate();
    require_same_shape(u, g, "energy");
    const double data = data_energy(u, g, spec.data_p);
    const int w = u.width(), h = u.height();
    double reg = 0.0;
    switch (spec.regularizer) {
        case Regularizer::nl_hessian: {
            if (spec.op->width() != w || spec.op->height() != h) {
                throw Error("energy: operator dimension mismatch");
            }
            const SymmetricField hu = spec.op->apply(u);
            for (std::size_t i = 0; i < u.size(); ++i) {
                reg += frobenius(hu.xx[i], hu.xy[i], hu.yy[i]);
            }
            return data + spec.alpha * reg;
        }
        case Regularizer::tv: {
            const double inv = 1.0 / u.spacing();
            for (int iy = 0; iy < h; ++iy) {
                for (int ix = 0; ix < w; ++ix) {
                    const double dx = ix + 1 < w ? (u(ix + 1, iy) - u(ix, iy)) * inv : 0.0;
                    const double dy = iy + 1 < h ? (u(ix, iy + 1) - u(ix, iy)) * inv : 0.0;
                    reg += std::hypot(dx, dy);
                }
            }
            return data + spec.alpha * reg;
        }
        case Regularizer::tv2: {
            const double inv = 1.0 / (u.spacing() * u.spacing());
            for (int iy = 0; iy < h; ++iy) {
                for (int ix = 0; ix < w; ++ix) {
                    double xx = 0.0, xy = 0.0, yy = 0.0;
                    if (ix >= 1 && ix + 1 < w) xx = u(ix - 1, iy) - 2 * u(ix, iy) + u(ix + 1, iy);
                    if (iy >= 1 && iy + 1 < h) yy = u(ix, iy - 1) - 2 * u(ix, iy) + u(ix, iy + 1);
                    if (ix + 1 < w && iy + 1 < h) {
                        xy = u(ix + 1, iy + 1) - u(ix + 1, iy) - u(ix, iy + 1) + u(ix, iy);
                    }
                    reg += frobenius(xx * inv, xy * inv, yy * inv);
                }
            }
            return data + spec.alpha * reg;
        }
        case Regularizer::tgv2:
            throw Error("energy: tgv2 needs the auxiliary field w");
    }
    return data;
}

double energy(const ImageGrid& u, const VectorField& wf, const ImageGrid& g,
              const EnergySpec& spec) {
    if (spec.regularizer != Regularizer::tgv2) return energy(u, g, spec);
    spec.validate();
    require_same_shape(u, g, "energy");
    require_same_shape(u, wf.x, "energy");
    require_same_shape(u, wf.y, "energy");
    const int w = u.width(), h = u.height();
    const double inv = 1.0 / u.spacing();
    double first = 0.0, second = 0.0;
    for (int iy = 0; iy < h; ++iy) {
        for (int ix = 0; ix < w; ++ix) {
            const double ax = ix + 1 < w ? (u(ix + 1, iy) - u(ix, iy)) * inv - wf.x(ix, iy) : 0.0;
            const double ay = iy + 1 < h ? (u(ix, iy + 1) - u(ix, iy)) * inv - wf.y(ix, iy) : 0.0;
            first += std::hypot(ax, ay);
            const double exx = ix + 2 < w ? (wf.x(ix + 1, iy) - wf.x(ix, iy)) * inv : 0.0;
            const double eyy = iy + 2 < h ? (wf.y(ix, iy + 1) - wf.y(ix, iy)) * inv : 0.0;
            double exy = 0.0;
            if (ix + 1 < w && iy + 1 < h) {
                exy = 0.5 * inv *
                      (wf.x(ix, iy + 1) - wf.x(ix, iy) + wf.y(ix + 1, iy) - wf.y(ix, iy));
            }
            second += frobenius(exx, exy, eyy);
        }
    }
    return data_energy(u, g, spec.data_p) + spec.alpha1 * first + spec.alpha0 * second;
}

OperatorNorm estimate_operator_norm(const SparseRM& k, int min_iters) {
    OperatorNorm out;
    const Eigen::Index n = k.cols();
    if (n == 0 || k.nonZeros() == 0) {
        out.vector = Eigen::VectorXd::Zero(n);
        return out;
    }
    std::mt19937_64 rng(0x5eed);
    std::normal_distribution<double> normal;
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
    v.normalize();
    const SparseRM kt = k.transpose();
    double prev = 0.0;
    const int max_iters = 50 * std::max(min_iters, 1);
    for (int it = 1; it <= max_iters; ++it) {
        const Eigen::VectorXd kv = k * v;
        const double rayleigh = kv.squaredNorm();
        Eigen::VectorXd next = kt * kv;
        const double nn = next.norm();
        if (nn == 0.0) {
            out.vector = v;
            out.iterations = it;
            return out;
        }
        v = next / nn;
        out.iterations = it;
        if (it >= min_iters && std::abs(rayleigh - prev) <= 1e-6 * rayleigh) {
            out.norm = std::sqrt((k * v).squaredNorm());
            out.vector = v;
            return out;
        }
        prev = rayleigh;
    }
    throw NumericalError("operator norm estimate failed to converge after " +
                         std::to_string(max_iters) + " power iterations");
}

Solution solve_primal_dual(const ImageGrid& g_in, const EnergySpec& spec, const SolverConfig& cfg,
                           const std::optional<ImageGrid>& u0) {
    spec.validate();
    validate_config(cfg);
    if (spec.regularizer != Regularizer::nl_hessian) {
        throw Error("solve_primal_dual: use solve_baseline for " +
                    std::string(to_string(spec.regularizer)));
    }
    const ImageGrid g = prepare_input(g_in, spec);
    if (spec.op->width() != g.width() || spec.op->height() != g.height()) {
        throw Error("solve_primal_dual: operator dimension mismatch");
    }
    Problem p;
    const auto& rows = spec.op->hessian_rows();
    std::vector<Triplet> t;
    t.reserve(static_cast<std::size_t>(rows.nonZeros()));
    for (Eigen::Index r = 0; r < rows.outerSize(); ++r) {
        const double s = spec.alpha * (r % 3 == 1 ? kSqrt2 : 1.0);
        for (NlHessianOperator::SparseRows::InnerIterator it(rows, r); it; ++it) {
            t.emplace_back(r, it.col(), s * it.value());
        }
    }
    p.k.resize(rows.rows(), rows.cols());
    p.k.setFromTriplets(t.begin(), t.end());
    p.k.prune(0.0);
    for (Eigen::Index r = 3; r <= rows.rows(); r += 3) p.group_start.push_back(r);
    finalize_data_term(p, g, spec.data_p);
    p.x0 = u0 ? to_vector(*u0) : p.g;
    return run_chambolle_pock(p, g, cfg, false);
}

Solution solve_baseline(const ImageGrid& g_in, const EnergySpec& spec, const SolverConfig& cfg,
                        const std::optional<ImageGrid>& u0) {
    spec.validate();
    validate_config(cfg);
    const ImageGrid g = prepare_input(g_in, spec);
    Problem p;
    switch (spec.regularizer) {
        case Regularizer::tv: p = tv_problem(g, spec.alpha); break;
        case Regularizer::tv2: p = tv2_problem(g, spec.alpha); break;
        case Regularizer::tgv2: p = tgv2_problem(g, spec.alpha0, spec.alpha1); break;
        case Regularizer::nl_hessian:
            throw Error("solve_baseline: nl_hessian is solved by solve_primal_dual");
    }
    p.k.prune(0.0);
    finalize_data_term(p, g, spec.data_p);
    const bool tgv = spec.regularizer == Regularizer::tgv2;
    const ImageGrid& start = u0 ? *u0 : g;
    require_same_shape(start, g, "solve_baseline");
    p.x0 = Eigen::VectorXd::Zero(p.k.cols());
    p.x0.head(p.n_u) = to_vector(start);
    if (tgv) {
        const VectorField d = staggered_gradient(start);
        p.x0.segment(p.n_u, p.n_u) = to_vector(d.x);
        p.x0.segment(2 * p.n_u, p.n_u) = to_vector(d.y);
    }
    return run_chambolle_pock(p, g, cfg, tgv);
}

Solution solve(const ImageGrid& g, const EnergySpec& spec, const SolverConfig& cfg,
               const std::optional<ImageGrid>& u0) {
    return spec.regularizer == Regularizer::nl_hessian ? solve_primal_dual(g, spec, cfg, u0)
                                                       : solve_baseline(g, spec, cfg, u0);
}

PipelineResult denoise_nl_hessian(const ImageGrid& g, const NlhPipelineParams& params,
                                  const SolverConfig& cfg) {
    if (params.m < 5) throw Error("denoise: M must be >= 5 (five fit unknowns per pixel)");
    if (params.iterate < 1) throw Error("denoise: iterate must be >= 1");
    PipelineResult out;
    ImageGrid source = params.clamp_input ? clamp01(g) : g;
    for (int pass = 0; pass < params.iterate; ++pass) {
        const NeighborhoodWeights nb = build_neighborhoods(source, params.gamma, params.m);
        const ImageGrid omega = build_local_weights(nb, params.m);
        auto op = std::make_shared<const NlHessianOperator>(
            assemble_operator(nb, omega, kDefaultRidge, g.spacing()));
        EnergySpec spec;
        spec.data_p = params.data_p;
        spec.alpha = params.alpha;
        spec.regularizer = Regularizer::nl_hessian;
        spec.op = op;
        spec.clamp_input = params.clamp_input;
        out.solution = solve_primal_dual(g, spec, cfg);
        out.passes.push_back(out.solution.report);
        out.last_operator = op;
        source = out.solution.u;
    }
    return out;
}

}  // namespace nlh
