#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nlh/image.hpp"
#include "nlh/nl_hessian.hpp"

namespace nlh {

enum class Regularizer { nl_hessian, tv, tv2, tgv2 };

const char* to_string(Regularizer r);
Regularizer regularizer_from_string(const std::string& name);

/// min_u sum |u - g|^p + R(u). R is alpha * sum omega |H'_u| for nl_hessian,
/// alpha * sum |grad u| for tv, alpha * sum |D2 u| for tv2 and
/// min_w alpha1 sum |grad u - w| + alpha0 sum |E w| for tgv2 (alpha unused).
struct EnergySpec {
    int data_p = 1;
    double alpha = 1.0;
    Regularizer regularizer = Regularizer::nl_hessian;
    /// Required for nl_hessian; omega is taken from the operator.
    std::shared_ptr<const NlHessianOperator> op;
    double alpha0 = 0.0;
    double alpha1 = 0.0;
    /// Clamp g to [0, 1] before solving.
    bool clamp_input = false;

    /// Throws Error naming the offending field.
    void validate() const;
};

/// scalar: tau = sigma = 0.99/|K|. diagonal: per-column tau_j = 1/sum_i |K_ij|
/// and per-dual-group sigma = min over the group's rows of 1/sum_j |K_ij|.
enum class StepRule { scalar, diagonal };

struct SolverConfig {
    int max_iters = 20000;
    double tol = 1e-7;
    double theta = 1.0;
    int norm_power_iters = 100;
    /// Convergence is tested and the energy sampled every this many iterations.
    int check_every = 10;
    StepRule steps = StepRule::diagonal;
    /// Adaptive restarts to the epoch average with primal-weight balancing
    /// (tau / w, sigma * w). Restart tests run every restart_check_every steps.
    bool restarts = true;
    int restart_check_every = 64;
};

struct EnergySample {
    int iter = 0;
    double energy = 0.0;
};

struct SolveReport {
    int iterations_run = 0;
    double final_energy = 0.0;
    std::vector<EnergySample> energy_trace;
    bool converged = false;
    double wall_time = 0.0;
    double operator_norm = 0.0;
    int restarts = 0;
    double primal_weight = 1.0;

    /// One JSON object on a single line. Without timing the output depends
    /// only on the inputs, so replays can be byte-compared.
    std::string to_json_line(bool include_timing = true) const;
    /// "iter,energy" header plus one row per sample.
    void write_trace_csv(std::ostream& os) const;
};

/// Auxiliary TGV field on staggered positions: x lives on (W-1) x H, y on
/// W x (H-1); unused trailing entries are zero.
struct Solution {
    ImageGrid u;
    std::optional<VectorField> w;
    SolveReport report;
};

/// Discrete energy by direct stencil loops, independent of the solver's
/// sparse operators. tgv2 needs the auxiliary field and throws here.
double energy(const ImageGrid& u, const ImageGrid& g, const EnergySpec& spec);
double energy(const ImageGrid& u, const VectorField& w, const ImageGrid& g,
              const EnergySpec& spec);

/// Chambolle-Pock iteration for the nl_hessian regularizer. `u0` overrides
/// the default initialisation u0 = g.
Solution solve_primal_dual(const ImageGrid& g, const EnergySpec& spec, const SolverConfig& cfg,
                           const std::optional<ImageGrid>& u0 = std::nullopt);

/// Same machinery for tv, tv2 and tgv2 with forward-difference stencils.
Solution solve_baseline(const ImageGrid& g, const EnergySpec& spec, const SolverConfig& cfg,
                        const std::optional<ImageGrid>& u0 = std::nullopt);

/// Dispatches on spec.regularizer.
Solution solve(const ImageGrid& g, const EnergySpec& spec, const SolverConfig& cfg,
               const std::optional<ImageGrid>& u0 = std::nullopt);

struct OperatorNorm {
    double norm = 0.0;
    Eigen::VectorXd vector;  // unit principal right singular vector
    int iterations = 0;
};

/// Power iteration on K'K from a seeded start. Throws NumericalError when the
/// estimate has not settled to 1e-6 relative within 50 * min_iters steps.
OperatorNorm estimate_operator_norm(const Eigen::SparseMatrix<double, Eigen::RowMajor>& k,
                                    int min_iters);

/// Non-local Hessian denoising with weights rebuilt `iterate` times, each
/// pass using the previous solution as the metric source.
struct NlhPipelineParams {
    std::size_t m = 12;
    double gamma = 0.01;
    int data_p = 1;
    double alpha = 1.0;
    int iterate = 1;
    bool clamp_input = false;
};

struct PipelineResult {
    Solution solution;
    std::shared_ptr<const NlHessianOperator> last_operator;
    std::vector<SolveReport> passes;
};

PipelineResult denoise_nl_hessian(const ImageGrid& g, const NlhPipelineParams& params,
                                  const SolverConfig& cfg);

}  // namespace nlh
