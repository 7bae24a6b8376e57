#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nlh {

/// How `measured` is judged against `expected` and `tolerance`.
enum class Comparison {
    absolute,  // |m - e| <= tol
    relative,  // |m - e| <= tol * |e|
    at_least,  // m >= e
    below,     // m < e
};

struct CheckResult {
    std::string name;
    double measured = 0.0;
    double expected = 0.0;
    double tolerance = 0.0;
    bool passed = false;
    Comparison comparison = Comparison::absolute;
};

CheckResult make_check(std::string name, double measured, double expected, double tolerance,
                       Comparison comparison = Comparison::absolute);

struct VerifyOptions {
    /// Test hook: scales the closed-form diagonal sphere constant.
    double cdiag_scale = 1.0;
    /// Monte-Carlo sample count for the sphere moments.
    long mc_samples = 10'000'000;
};

/// Sphere moments on S^0, S^1 and S^2 by Monte-Carlo and deterministic quadrature.
std::vector<CheckResult> check_constants(const VerifyOptions& opts = {});

/// Lattice-based counterpart of check_localization, printed for comparison.
struct LocalizationDiagnostics {
    std::vector<double> deltas;
    std::vector<double> grid_free_sup, grid_free_l1;
    std::vector<double> lattice_sup, lattice_l1;
};

/// Gaussian bump on a 257^2 pixel grid, ball mollifiers of radius 16, 8, 4, 2 px.
std::vector<CheckResult> check_localization(LocalizationDiagnostics* diagnostics = nullptr);

/// Circle least squares vs closed form, and explicit Hessian vs shell average.
std::vector<CheckResult> check_implicit_explicit();

/// Discrete second-order integration by parts on random compactly supported pairs.
std::vector<CheckResult> check_adjointness();

std::vector<CheckResult> run_all_checks(const VerifyOptions& opts = {},
                                        LocalizationDiagnostics* diagnostics = nullptr);

/// Header "name,measured,expected,tolerance,passed", one row per check.
void write_checks_csv(std::ostream& os, const std::vector<CheckResult>& checks);
void print_checks_table(std::ostream& os, const std::vector<CheckResult>& checks);
void print_localization_diagnostics(std::ostream& os, const LocalizationDiagnostics& d);

bool all_passed(const std::vector<CheckResult>& checks);

}  // namespace nlh
