// Acceptance run: one PASS/FAIL line per criterion, with the measured numbers
// and the wall time of each criterion. Exit status is 0 iff all criteria pass.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <limits>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nlh/eikonal.hpp"
#include "nlh/metrics.hpp"
#include "nlh/nl_hessian.hpp"
#include "nlh/scene.hpp"
#include "nlh/solver.hpp"
#include "nlh/verify.hpp"
#include "oracles.hpp"

using namespace nlh;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool passed = false;
    std::string summary;
};

int failures = 0;

void report(int id, const Outcome& o, double secs, double budget) {
    const bool in_time = secs < budget;
    const bool pass = o.passed && in_time;
    if (!pass) ++failures;
    std::printf("CRITERION %d %s  %s; runtime %.1f s (limit %.0f s%s)\n", id, pass ? "PASS" : "FAIL",
                o.summary.c_str(), secs, budget, in_time ? "" : ", EXCEEDED");
    std::fflush(stdout);
}

template <class F>
void run_criterion(int id, double budget, F&& body) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    report(id, o, seconds_since(t0), budget);
}

std::string failed_names(const std::vector<CheckResult>& checks) {
    std::string s;
    for (const auto& c : checks)
        if (!c.passed) s += (s.empty() ? "" : "; ") + c.name;
    return s;
}

Outcome from_checks(const std::vector<CheckResult>& checks, const std::string& what) {
    print_checks_table(std::cout, checks);
    const bool ok = all_passed(checks);
    std::ostringstream os;
    os << what << ": " << checks.size() << " checks, "
       << (ok ? "all passed" : "failed: " + failed_names(checks));
    return {ok, os.str()};
}

// ------------------------------------------------------------ criterion 2

Outcome quadratic_exactness() {
    std::mt19937_64 rng(42);
    const int n = 64;
    // Geodesic neighbourhoods from the noisy disc scene, so they are irregular.
    const ImageGrid scene = add_gaussian_noise(make_disc_slope({}), {0.25, 1});
    const NeighborhoodWeights nb = build_neighborhoods(scene, 0.01, 12);
    std::uniform_int_distribution<int> coord(0, n - 1);
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    std::vector<PixelIndex> pixels;
    for (int k = 0; k < 100; ++k) pixels.push_back({coord(rng), coord(rng)});

    double worst = 0.0;
    std::size_t ridged = 0;
    ImageGrid u(n, n);
    for (int q = 0; q < 100; ++q) {
        const double c0 = coef(rng), c1 = coef(rng), c2 = coef(rng);
        const double hxx = coef(rng), hxy = coef(rng), hyy = coef(rng);
        for (int iy = 0; iy < n; ++iy) {
            for (int ix = 0; ix < n; ++ix) {
                const double x = (ix - n / 2) / 8.0, y = (iy - n / 2) / 8.0;
                u(ix, iy) = c0 + c1 * x + c2 * y + 0.5 * hxx * x * x + hxy * x * y +
                            0.5 * hyy * y * y;
            }
        }
        // x and y above are in units of 8 px, so the pixel Hessian is H/64.
        const double s = 1.0 / 64.0;
        for (const PixelIndex& p : pixels) {
            const QuadraticFit fit = fit_quadratic(u, p, nb);
            ridged += fit.ridged ? 1 : 0;
            worst = std::max(worst, frobenius(fit.hessian.xx - hxx * s, fit.hessian.xy - hxy * s,
                                              fit.hessian.yy - hyy * s));
        }
    }
    std::ostringstream os;
    os << "quadratic exactness: max |H_fit - H| = " << worst << " (limit 1e-9) over 100 x 100, "
       << ridged << " ridged fits";
    return {worst <= 1e-9, os.str()};
}

// ------------------------------------------------------------ criterion 9

Outcome fmm_vs_dijkstra() {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> speed(0.1, 2.0);
    std::uniform_int_distribution<int> coord(0, 31);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        MetricField m{ImageGrid(32, 32), 0.0};
        for (auto& v : m.slowness.raw()) v = speed(rng);
        const PixelIndex src{coord(rng), coord(rng)};
        const DistanceMap fmm = fast_march_from(src, m, m.slowness.size());
        const std::vector<double> ref = test::dijkstra_upwind(m, src);
        for (std::size_t i = 0; i < ref.size(); ++i) {
            worst = std::max(worst, std::abs(fmm.distance[i] - ref[i]) / std::max(1.0, ref[i]));
        }
    }
    std::ostringstream os;
    os << "fast marching vs Dijkstra on the upwind graph, 20 random 32^2 metrics: max error "
       << worst << " (limit 1e-12, relative to max(1, distance))";
    return {worst <= 1e-12, os.str()};
}

// ------------------------------------------------------------ criteria 6-8

struct Candidate {
    std::string label;
    EnergySpec spec;  // op unset for nlh; built from gamma
    double gamma = 0.0;
    double screen_psnr = -1.0;
};

struct Scene {
    ImageGrid clean, noisy;
    std::vector<bool> inside, band;
};

Scene disc_scene() {
    const DiscSlopeParams p;
    Scene s;
    s.clean = make_disc_slope(p);
    s.noisy = add_gaussian_noise(s.clean, {0.25, 1});
    s.inside = disc_mask(p.n, p.radius);
    s.band = disc_boundary_band(p.n, p.radius);
    return s;
}

constexpr std::size_t kM = 12;
constexpr int kIterate = 1;

Solution solve_candidate(const Scene& sc, const Candidate& c, const SolverConfig& cfg) {
    if (c.spec.regularizer == Regularizer::nl_hessian) {
        NlhPipelineParams pp;
        pp.m = kM;
        pp.gamma = c.gamma;
        pp.data_p = c.spec.data_p;
        pp.alpha = c.spec.alpha;
        pp.iterate = kIterate;
        return denoise_nl_hessian(sc.noisy, pp, cfg).solution;
    }
    return solve(sc.noisy, c.spec, cfg);
}

struct Winner {
    Candidate c;
    Solution sol;
    double psnr = 0.0;
};

std::vector<double> linspace(double a, double step, int n) {
    std::vector<double> v;
    for (int i = 0; i < n; ++i) v.push_back(a + step * i);
    return v;
}

std::vector<Candidate> declared_grid(Regularizer r) {
    std::vector<Candidate> out;
    auto spec = [&](double alpha) {
        EnergySpec s;
        s.data_p = 1;
        s.alpha = alpha;
        s.regularizer = r;
        return s;
    };
    std::ostringstream os;
    switch (r) {
        case Regularizer::nl_hessian:
            for (double a : {0.5, 1.0, 2.0, 4.0, 8.0})
                for (double g : {1e-4, 3e-4, 1e-3, 3e-3, 1e-2}) {
                    os.str("");
                    os << "alpha=" << a << " gamma=" << g;
                    out.push_back({os.str(), spec(a), g});
                }
            break;
        case Regularizer::tv:
            for (double a : linspace(0.3, 0.1, 25)) {
                os.str("");
                os << "alpha=" << a;
                out.push_back({os.str(), spec(a)});
            }
            break;
        case Regularizer::tv2:
            for (double a : linspace(0.2, 0.2, 25)) {
                os.str("");
                os << "alpha=" << a;
                out.push_back({os.str(), spec(a)});
            }
            break;
        case Regularizer::tgv2:
            for (double a0 : {0.75, 1.5, 3.0, 6.0, 12.0})
                for (double a1 : {0.7, 0.9, 1.1, 1.3, 1.5}) {
                    EnergySpec s = spec(0.0);
                    s.alpha0 = a0;
                    s.alpha1 = a1;
                    os.str("");
                    os << "alpha0=" << a0 << " alpha1=" << a1;
                    out.push_back({os.str(), s});
                }
            break;
    }
    return out;
}

constexpr int kScreenIters = 3000;
constexpr int kRefineTop = 3;

/// Screens the declared grid with a reduced iteration cap, then re-solves the
/// best kRefineTop candidates with the default solver settings.
Winner grid_search(const Scene& sc, Regularizer r) {
    std::vector<Candidate> grid = declared_grid(r);
    SolverConfig screen;
    screen.max_iters = kScreenIters;
    for (Candidate& c : grid) c.screen_psnr = psnr(sc.clean, solve_candidate(sc, c, screen).u);
    std::sort(grid.begin(), grid.end(),
              [](const Candidate& a, const Candidate& b) { return a.screen_psnr > b.screen_psnr; });
    Winner best;
    best.psnr = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < kRefineTop; ++k) {
        Solution s = solve_candidate(sc, grid[k], SolverConfig{});
        const double p = psnr(sc.clean, s.u);
        std::printf("    %-5s %-26s screen %.2f dB  full %.2f dB  (%d its%s)\n", to_string(r),
                    grid[k].label.c_str(), grid[k].screen_psnr, p, s.report.iterations_run,
                    s.report.converged ? ", converged" : ", at cap");
        if (p > best.psnr) best = {grid[k], std::move(s), p};
    }
    return best;
}

double max_inside(const ImageGrid& u, const std::vector<bool>& inside) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < u.size(); ++i)
        if (inside[i]) m = std::max(m, u[i]);
    return m;
}

double sup_error_off_band(const ImageGrid& u, const Scene& sc) {
    double e = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i)
        if (!sc.band[i]) e = std::max(e, std::abs(u[i] - sc.clean[i]));
    return e;
}

}  // namespace

int main() {
    std::printf("acceptance run: criteria 1-9\n");

    run_criterion(1, 10.0, [] { return from_checks(check_constants(), "sphere constants"); });
    run_criterion(2, 5.0, quadratic_exactness);
    run_criterion(3, 10.0,
                  [] { return from_checks(check_implicit_explicit(), "implicit vs explicit"); });
    run_criterion(4, 10.0, [] { return from_checks(check_adjointness(), "adjointness"); });
    run_criterion(5, 60.0, [] {
        LocalizationDiagnostics d;
        Outcome o = from_checks(check_localization(&d), "localization (grid-free)");
        print_localization_diagnostics(std::cout, d);
        return o;
    });

    const Scene sc = disc_scene();
    const double clean_max = max_inside(sc.clean, sc.inside);
    std::vector<Winner> winners;
    run_criterion(6, 300.0, [&] {
        std::printf("  64^2 disc slope, sigma 0.25, seed 1, p = 1, input %.2f dB\n",
                    psnr(sc.clean, sc.noisy));
        std::printf("  screening 25 grid points per method at %d iterations, top %d re-solved "
                    "with defaults\n",
                    kScreenIters, kRefineTop);
        for (Regularizer r :
             {Regularizer::nl_hessian, Regularizer::tv, Regularizer::tv2, Regularizer::tgv2})
            winners.push_back(grid_search(sc, r));
        const Winner& nl = winners[0];

        // Not scored: the same model with weights from the clean image, and how
        // many neighbourhoods straddle the disc edge in each case.
        auto crossings = [&](const NeighborhoodWeights& nb) {
            std::size_t count = 0;
            for (int iy = 0; iy < 64; ++iy)
                for (int ix = 0; ix < 64; ++ix) {
                    const std::size_t i = sc.clean.index(ix, iy);
                    for (const NeighborEntry& e : nb[i]) {
                        if (sc.inside[sc.clean.index(ix + e.offset.dx, iy + e.offset.dy)] !=
                            sc.inside[i]) {
                            ++count;
                            break;
                        }
                    }
                }
            return count;
        };
        const NeighborhoodWeights data_nb = build_neighborhoods(sc.noisy, nl.c.gamma, kM);
        const NeighborhoodWeights clean_nb = build_neighborhoods(sc.clean, 1e-3, kM);
        EnergySpec oracle = nl.c.spec;
        oracle.op = std::make_shared<const NlHessianOperator>(
            assemble_operator(clean_nb, build_local_weights(clean_nb, kM)));
        const Solution o = solve(sc.noisy, oracle, SolverConfig{});
        std::printf("  diagnostic: neighbourhoods crossing the disc edge: %zu with weights from "
                    "the noisy input, %zu from the clean image (gamma 1e-3); nlh alpha=%g with "
                    "clean-image weights: %.2f dB, sup error off the edge band %.4f\n",
                    crossings(data_nb), crossings(clean_nb), nl.c.spec.alpha,
                    psnr(sc.clean, o.u), sup_error_off_band(o.u, sc));
        const double gap_tv = nl.psnr - winners[1].psnr;
        const double gap_tv2 = nl.psnr - winners[2].psnr;
        const double sup = sup_error_off_band(nl.sol.u, sc);
        std::ostringstream os;
        os.precision(4);
        os << "PSNR nlh " << nl.psnr << " (" << nl.c.label << "), tv " << winners[1].psnr << " ("
           << winners[1].c.label << "), tv2 " << winners[2].psnr << " (" << winners[2].c.label
           << "), tgv2 " << winners[3].psnr << " (" << winners[3].c.label
           << "); nlh - tv = " << gap_tv << " dB (need >= 2), nlh - tv2 = " << gap_tv2
           << " dB (need >= 1); nlh sup error off the edge band " << sup << " (need <= 0.02)";
        return Outcome{gap_tv >= 2.0 && gap_tv2 >= 1.0 && sup <= 0.02, os.str()};
    });

    run_criterion(7, 300.0, [&] {
        if (winners.size() != 4) return Outcome{false, "criterion 6 produced no results"};
        const double nl_max = max_inside(winners[0].sol.u, sc.inside);
        const double tgv_max = max_inside(winners[3].sol.u, sc.inside);
        const double nl_gap = std::abs(nl_max - clean_max);
        const double tgv_clip = clean_max - tgv_max;
        std::ostringstream os;
        os.precision(4);
        os << "max inside disc: clean " << clean_max << ", nlh " << nl_max << " (|gap| " << nl_gap
           << ", need <= 0.01), tgv2 " << tgv_max << " (clip " << tgv_clip << ", need >= 0.02)";
        return Outcome{nl_gap <= 0.01 && tgv_clip >= 0.02, os.str()};
    });

    run_criterion(8, 300.0, [&] {
        if (winners.size() != 4) return Outcome{false, "criterion 6 produced no results"};
        SolverConfig doubled;
        doubled.max_iters = 2 * SolverConfig{}.max_iters;
        double worst_energy = 0.0;
        std::ostringstream os;
        os.precision(3);
        os << "doubling max_iters:";
        for (const Winner& w : winners) {
            const Solution s = solve_candidate(sc, w.c, doubled);
            const double rel = std::abs(s.report.final_energy - w.sol.report.final_energy) /
                               std::abs(s.report.final_energy);
            worst_energy = std::max(worst_energy, rel);
            os << ' ' << to_string(w.c.spec.regularizer) << ' ' << rel;
        }
        os << " (need < 1e-6);";

        // p = 2 from u0 = g and from u0 = 0 with the criterion-6 winners' parameters.
        // The default tol bounds the last step, not the distance to the minimiser,
        // so these runs use a tighter tol.
        SolverConfig tight;
        tight.tol = 1e-10;
        tight.max_iters = 400000;
        double worst_init = 0.0;
        os << " p=2 (tol 1e-10) sup |u(g) - u(0)|:";
        for (const Winner& w : winners) {
            Candidate c = w.c;
            c.spec.data_p = 2;
            if (c.spec.regularizer == Regularizer::nl_hessian) {
                // Same operator as the single-pass pipeline builds from g.
                const NeighborhoodWeights nb = build_neighborhoods(sc.noisy, c.gamma, kM);
                c.spec.op = std::make_shared<const NlHessianOperator>(
                    assemble_operator(nb, build_local_weights(nb, kM)));
            }
            const Solution a = solve(sc.noisy, c.spec, tight);
            const Solution b =
                solve(sc.noisy, c.spec, tight, ImageGrid(sc.noisy.width(), sc.noisy.height()));
            double d = 0.0;
            for (std::size_t i = 0; i < a.u.size(); ++i) d = std::max(d, std::abs(a.u[i] - b.u[i]));
            worst_init = std::max(worst_init, d);
            os << ' ' << to_string(c.spec.regularizer) << ' ' << d;
        }
        os << " (need <= 1e-6)";
        return Outcome{worst_energy < 1e-6 && worst_init <= 1e-6, os.str()};
    });

    run_criterion(9, 60.0, fmm_vs_dijkstra);

    std::printf("acceptance: %d of 9 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
