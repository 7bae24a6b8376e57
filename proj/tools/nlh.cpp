#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nlh/image_io.hpp"
#include "nlh/metrics.hpp"
#include "nlh/scene.hpp"
#include "nlh/solver.hpp"
#include "nlh/verify.hpp"

#ifndef NLH_BUILD_ID
#define NLH_BUILD_ID "unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum ExitCode { ok = 0, usage = 1, numerical = 2, verification = 3 };

/// A usage error tied to a command-line flag.
struct FlagError : nlh::Error {
    FlagError(const std::string& flag, const std::string& what) : nlh::Error(flag + ": " + what) {}
};

/// Shortest representation that parses back to the same double.
std::string num(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string abs_path(const std::string& p) { return fs::absolute(p).lexically_normal().string(); }

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw nlh::IoError(path, "cannot open for writing");
    os << text;
    if (!os) throw nlh::IoError(path, "write failed");
}

/// Written next to every output; `argv` is canonical (every parameter
/// explicit, paths absolute) so that `nlh replay` reproduces the run.
void write_manifest(const fs::path& out_dir, const std::string& command,
                    const std::vector<std::string>& argv, json parameters, json inputs,
                    json outputs) {
    const json m = {{"command", command},       {"argv", argv},
                    {"parameters", parameters}, {"inputs", inputs},
                    {"outputs", outputs},       {"build_id", NLH_BUILD_ID}};
    write_text(out_dir / "manifest.json", m.dump(2) + "\n");
}

fs::path prepare_out_dir(const std::string& dir) {
    fs::path p(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw nlh::IoError(p, "cannot create output directory: " + ec.message());
    return p;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
    std::string scene = "disc_slope";
    int n = 64;
    double radius = 0.0;  // 0 selects 20/64 of n
    double sigma = 0.0;
    std::uint64_t seed = 1;
    std::string out;
};

int cmd_synth(const SynthArgs& a) {
    const double radius = a.radius > 0.0 ? a.radius : a.n * 20.0 / 64.0;
    nlh::ImageGrid clean = [&] {
        if (a.scene == "disc_slope") {
            nlh::DiscSlopeParams p;
            p.n = a.n;
            p.radius = radius;
            return nlh::make_disc_slope(p);
        }
        return nlh::make_opposing_slopes(a.n);
    }();
    const nlh::ImageGrid noisy =
        a.sigma > 0.0 ? nlh::add_gaussian_noise(clean, {a.sigma, a.seed}) : clean;
    const fs::path dir = prepare_out_dir(a.out);
    nlh::save_image(clean, dir / "clean.pgm");
    nlh::save_image(noisy, dir / "noisy.pgm");

    const std::vector<std::string> argv = {"synth",  a.scene,         "--n",    std::to_string(a.n),
                                           "--radius", num(radius),  "--sigma", num(a.sigma),
                                           "--seed", std::to_string(a.seed), "--out",
                                           abs_path(a.out)};
    json params = {{"scene", a.scene}, {"n", a.n}, {"sigma", a.sigma}, {"seed", a.seed}};
    if (a.scene == "disc_slope") params["radius"] = radius;
    write_manifest(dir, "synth", argv, params, json::object(),
                   {{"clean", abs_path((dir / "clean.pgm").string())},
                    {"noisy", abs_path((dir / "noisy.pgm").string())}});
    std::cout << "wrote " << (dir / "clean.pgm").string() << " and "
              << (dir / "noisy.pgm").string() << '\n';
    return ok;
}

// ---------------------------------------------------------------- denoise

struct DenoiseArgs {
    std::string in;
    std::string method = "nlh";
    std::size_t m = 12;
    double gamma = 0.01;
    double alpha = 1.0;
    std::optional<double> alpha0, alpha1;
    int p = 1;
    int iterate = 1;
    bool clamp = false;
    std::string truth;
    int max_iters = 20000;
    double tol = 1e-7;
    std::string steps = "diagonal";
    bool no_restarts = false;
    std::string out;
    bool dump_operator = false;
    // Which nlh-only flags were given explicitly.
    bool m_set = false, gamma_set = false, iterate_set = false;
};

void validate(const DenoiseArgs& a) {
    const bool nlh_method = a.method == "nlh";
    if (!nlh_method) {
        if (a.m_set) throw FlagError("--M", "only applies to --method nlh");
        if (a.gamma_set) throw FlagError("--gamma", "only applies to --method nlh");
        if (a.iterate_set) throw FlagError("--iterate", "only applies to --method nlh");
        if (a.dump_operator) throw FlagError("--dump-operator", "only applies to --method nlh");
    }
    if (a.method == "tgv2") {
        if (!a.alpha0) throw FlagError("--alpha0", "required for --method tgv2");
        if (!a.alpha1) throw FlagError("--alpha1", "required for --method tgv2");
        if (!(*a.alpha0 > 0.0)) throw FlagError("--alpha0", "must be positive");
        if (!(*a.alpha1 > 0.0)) throw FlagError("--alpha1", "must be positive");
    } else {
        if (a.alpha0) throw FlagError("--alpha0", "only applies to --method tgv2");
        if (a.alpha1) throw FlagError("--alpha1", "only applies to --method tgv2");
    }
}

void write_second_differences(const fs::path& dir, const nlh::ImageGrid& u) {
    const nlh::SecondDifferenceStats st = nlh::second_difference_stats(u, 1e-3);
    const int bins = 41;
    const double lo = -0.205, width = 0.01;  // bin 20 is centred on zero
    std::vector<long> counts(bins, 0);
    for (double v : st.values) {
        const int b = static_cast<int>(std::floor((v - lo) / width));
        counts[std::clamp(b, 0, bins - 1)] += 1;
    }
    std::ostringstream os;
    os << std::setprecision(17) << "bin_low,bin_high,count\n";
    for (int b = 0; b < bins; ++b) {
        os << (b == 0 ? -INFINITY : lo + b * width) << ','
           << (b == bins - 1 ? INFINITY : lo + (b + 1) * width) << ',' << counts[b] << '\n';
    }
    write_text(dir / "second_differences.csv", os.str());
    write_text(dir / "staircase.csv", "zero_fraction,excess_kurtosis\n" + num(st.zero_fraction) +
                                          "," + num(st.excess_kurtosis) + "\n");
}

int cmd_denoise(DenoiseArgs a) {
    validate(a);
    const nlh::ImageGrid g = nlh::load_image(a.in);
    std::optional<nlh::ImageGrid> truth;
    if (!a.truth.empty()) {
        truth = nlh::load_image(a.truth);
        nlh::require_same_shape(*truth, g, "--truth");
    }
    nlh::SolverConfig cfg;
    cfg.max_iters = a.max_iters;
    cfg.tol = a.tol;
    cfg.steps = a.steps == "scalar" ? nlh::StepRule::scalar : nlh::StepRule::diagonal;
    cfg.restarts = !a.no_restarts;

    const fs::path dir = prepare_out_dir(a.out);
    nlh::Solution sol;
    std::vector<nlh::SolveReport> passes;
    if (a.method == "nlh") {
        nlh::NlhPipelineParams pp;
        pp.m = a.m;
        pp.gamma = a.gamma;
        pp.data_p = a.p;
        pp.alpha = a.alpha;
        pp.iterate = a.iterate;
        pp.clamp_input = a.clamp;
        nlh::PipelineResult r = nlh::denoise_nl_hessian(g, pp, cfg);
        if (a.dump_operator) {
            std::ofstream os(dir / "operator_triplets.csv");
            r.last_operator->dump_triplets(os);
        }
        sol = std::move(r.solution);
        passes = std::move(r.passes);
    } else {
        nlh::EnergySpec spec;
        spec.data_p = a.p;
        spec.alpha = a.alpha;
        spec.regularizer = nlh::regularizer_from_string(a.method);
        spec.alpha0 = a.alpha0.value_or(0.0);
        spec.alpha1 = a.alpha1.value_or(0.0);
        spec.clamp_input = a.clamp;
        sol = nlh::solve(g, spec, cfg);
        passes = {sol.report};
    }

    nlh::save_image(sol.u, dir / "denoised.pgm");
    json report = {{"method", a.method}, {"passes", json::array()}};
    for (const auto& r : passes) report["passes"].push_back(json::parse(r.to_json_line(false)));
    write_text(dir / "report.json", report.dump(2) + "\n");
    {
        std::ostringstream os;
        sol.report.write_trace_csv(os);
        write_text(dir / "trace.csv", os.str());
    }
    write_second_differences(dir, sol.u);

    json outputs = {{"denoised", abs_path((dir / "denoised.pgm").string())},
                    {"report", abs_path((dir / "report.json").string())}};
    if (truth) {
        std::ostringstream os;
        os << std::setprecision(17) << "name,psnr_db,ssim\n";
        os << "input," << nlh::psnr(*truth, g) << ',' << nlh::ssim(*truth, g) << '\n';
        os << a.method << ',' << nlh::psnr(*truth, sol.u) << ',' << nlh::ssim(*truth, sol.u)
           << '\n';
        write_text(dir / "metrics.csv", os.str());
        outputs["metrics"] = abs_path((dir / "metrics.csv").string());
        std::cout << "psnr " << nlh::psnr(*truth, g) << " dB -> " << nlh::psnr(*truth, sol.u)
                  << " dB\n";
    }

    std::vector<std::string> argv = {"denoise", "--in",     abs_path(a.in), "--method",
                                     a.method,  "--alpha",  num(a.alpha),   "--p",
                                     std::to_string(a.p),   "--max-iters",  std::to_string(a.max_iters),
                                     "--tol",   num(a.tol), "--steps",      a.steps,
                                     "--out",   abs_path(a.out)};
    json params = {{"method", a.method}, {"alpha", a.alpha},         {"p", a.p},
                   {"clamp", a.clamp},   {"max_iters", a.max_iters}, {"tol", a.tol},
                   {"steps", a.steps},   {"restarts", !a.no_restarts}};
    if (a.method == "nlh") {
        argv.insert(argv.end(), {"--M", std::to_string(a.m), "--gamma", num(a.gamma), "--iterate",
                                 std::to_string(a.iterate)});
        params["M"] = a.m;
        params["gamma"] = a.gamma;
        params["iterate"] = a.iterate;
        if (a.dump_operator) argv.push_back("--dump-operator");
    }
    if (a.method == "tgv2") {
        argv.insert(argv.end(), {"--alpha0", num(*a.alpha0), "--alpha1", num(*a.alpha1)});
        params["alpha0"] = *a.alpha0;
        params["alpha1"] = *a.alpha1;
    }
    if (a.clamp) argv.push_back("--clamp");
    if (a.no_restarts) argv.push_back("--no-restarts");
    json inputs = {{"in", abs_path(a.in)}};
    if (truth) {
        argv.insert(argv.end(), {"--truth", abs_path(a.truth)});
        inputs["truth"] = abs_path(a.truth);
    }
    write_manifest(dir, "denoise", argv, params, inputs, outputs);
    std::cout << "iterations " << sol.report.iterations_run << ", energy "
              << sol.report.final_energy << ", converged " << std::boolalpha
              << sol.report.converged << ", " << sol.report.wall_time << " s\n";
    return ok;
}

// ---------------------------------------------------------------- verify

struct VerifyArgs {
    std::string out = ".";
    double corrupt_cdiag = 1.0;
};

int cmd_verify(const VerifyArgs& a) {
    nlh::VerifyOptions opts;
    opts.cdiag_scale = a.corrupt_cdiag;
    nlh::LocalizationDiagnostics diag;
    const auto checks = nlh::run_all_checks(opts, &diag);
    const fs::path dir = prepare_out_dir(a.out);
    std::ostringstream csv;
    nlh::write_checks_csv(csv, checks);
    write_text(dir / "verify.csv", csv.str());
    nlh::print_checks_table(std::cout, checks);
    std::cout << '\n';
    nlh::print_localization_diagnostics(std::cout, diag);

    std::vector<std::string> argv = {"verify", "--out", abs_path(a.out)};
    if (a.corrupt_cdiag != 1.0) argv.insert(argv.end(), {"--corrupt-cdiag", num(a.corrupt_cdiag)});
    write_manifest(dir, "verify", argv, {{"corrupt_cdiag", a.corrupt_cdiag}}, json::object(),
                   {{"verify", abs_path((dir / "verify.csv").string())}});
    const bool pass = nlh::all_passed(checks);
    std::cout << (pass ? "all checks passed" : "verification FAILED") << '\n';
    return pass ? ok : verification;
}

// ---------------------------------------------------------------- compare

struct CompareArgs {
    std::string clean, noisy;
    std::vector<std::string> results;  // "name=path" or "path"
    std::string out;
};

int cmd_compare(const CompareArgs& a) {
    const nlh::ImageGrid clean = nlh::load_image(a.clean);
    std::vector<std::pair<std::string, std::string>> entries = {{"noisy", a.noisy}};
    for (const auto& r : a.results) {
        const auto eq = r.find('=');
        if (eq == std::string::npos) {
            entries.emplace_back(fs::path(r).stem().string(), r);
        } else {
            entries.emplace_back(r.substr(0, eq), r.substr(eq + 1));
        }
    }
    const fs::path dir = prepare_out_dir(a.out);
    std::ostringstream csv;
    csv << std::setprecision(17) << "name,psnr_db,ssim\n";
    json outputs = {{"compare", abs_path((dir / "compare.csv").string())}};
    for (const auto& [name, path] : entries) {
        const nlh::ImageGrid img = nlh::load_image(path);
        nlh::require_same_shape(clean, img, path.c_str());
        const double p = nlh::psnr(clean, img);
        csv << name << ',' << (std::isinf(p) ? std::string("inf") : num(p)) << ','
            << nlh::ssim(clean, img) << '\n';
        nlh::ImageGrid err(clean.width(), clean.height());
        for (std::size_t i = 0; i < err.size(); ++i) {
            const double d = img[i] - clean[i];
            err[i] = d * d;
        }
        const fs::path err_path = dir / ("error_" + name + ".pgm");
        nlh::save_image(err, err_path);
        outputs["error_" + name] = abs_path(err_path.string());
    }
    write_text(dir / "compare.csv", csv.str());
    std::cout << csv.str();

    std::vector<std::string> argv = {"compare", "--clean", abs_path(a.clean), "--noisy",
                                     abs_path(a.noisy), "--out", abs_path(a.out)};
    json inputs = {{"clean", abs_path(a.clean)}, {"noisy", abs_path(a.noisy)}};
    for (std::size_t i = 1; i < entries.size(); ++i) {
        argv.push_back(entries[i].first + "=" + abs_path(entries[i].second));
        inputs[entries[i].first] = abs_path(entries[i].second);
    }
    write_manifest(dir, "compare", argv, json::object(), inputs, outputs);
    return ok;
}

// ---------------------------------------------------------------- dispatch

int run(std::vector<std::string> args);

int cmd_replay(const std::string& manifest_path, const std::string& out) {
    std::ifstream is(manifest_path);
    if (!is) throw nlh::IoError(manifest_path, "cannot open manifest");
    json m;
    try {
        m = json::parse(is);
    } catch (const json::exception& e) {
        throw nlh::IoError(manifest_path, std::string("malformed manifest: ") + e.what());
    }
    if (!m.contains("argv") || !m["argv"].is_array())
        throw nlh::IoError(manifest_path, "manifest has no argv array");
    std::vector<std::string> argv = m["argv"].get<std::vector<std::string>>();
    if (!argv.empty() && argv.front() == "replay")
        throw nlh::IoError(manifest_path, "a replay manifest cannot be replayed");
    if (!out.empty()) {
        auto it = std::find(argv.begin(), argv.end(), "--out");
        if (it == argv.end() || it + 1 == argv.end())
            throw nlh::IoError(manifest_path, "manifest argv has no --out");
        *(it + 1) = abs_path(out);
    }
    return run(argv);
}

int run(std::vector<std::string> args) {
    CLI::App app{"Non-local Hessian image restoration"};
    app.name("nlh");
    app.require_subcommand(1);

    SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "Synthesize a clean and a noisy test scene");
    synth->add_option("scene", sa.scene, "disc_slope or opposing_slopes")
        ->check(CLI::IsMember({"disc_slope", "opposing_slopes"}))
        ->required();
    synth->add_option("--n", sa.n, "Image side length")->check(CLI::Range(8, 4096));
    synth->add_option("--radius", sa.radius, "Disc radius in pixels (default 20/64 of n)")
        ->check(CLI::NonNegativeNumber);
    synth->add_option("--sigma", sa.sigma, "Gaussian noise standard deviation")
        ->check(CLI::NonNegativeNumber);
    synth->add_option("--seed", sa.seed, "Noise seed");
    synth->add_option("--out", sa.out, "Output directory")->required();

    DenoiseArgs da;
    auto* denoise = app.add_subcommand("denoise", "Denoise an image");
    denoise->add_option("--in", da.in, "Input image (PGM or PNG)")->required();
    denoise->add_option("--method", da.method, "nlh, tv, tv2 or tgv2")
        ->check(CLI::IsMember({"nlh", "tv", "tv2", "tgv2"}));
    auto* m_opt = denoise->add_option("--M", da.m, "Neighbourhood size (nlh)")
                      ->check(CLI::Range(static_cast<std::size_t>(5), static_cast<std::size_t>(1000)));
    auto* gamma_opt = denoise->add_option("--gamma", da.gamma, "Metric regularisation (nlh)")
                          ->check(CLI::PositiveNumber);
    denoise->add_option("--alpha", da.alpha, "Regularisation weight (nlh, tv, tv2)")
        ->check(CLI::NonNegativeNumber);
    denoise->add_option("--alpha0", da.alpha0, "Second-order TGV weight");
    denoise->add_option("--alpha1", da.alpha1, "First-order TGV weight");
    denoise->add_option("--p", da.p, "Data fidelity exponent")->check(CLI::IsMember({1, 2}));
    auto* iterate_opt =
        denoise->add_option("--iterate", da.iterate, "Weight construction passes (nlh)")
            ->check(CLI::Range(1, 100));
    denoise->add_flag("--clamp", da.clamp, "Clamp the input to [0, 1] before solving");
    denoise->add_option("--truth", da.truth, "Ground truth image for metrics");
    denoise->add_option("--max-iters", da.max_iters, "Iteration cap")->check(CLI::Range(1, 100000000));
    denoise->add_option("--tol", da.tol, "Stopping tolerance")->check(CLI::PositiveNumber);
    denoise->add_option("--steps", da.steps, "Step rule: diagonal or scalar")
        ->check(CLI::IsMember({"diagonal", "scalar"}));
    denoise->add_flag("--no-restarts", da.no_restarts,
                      "Plain primal-dual iteration without restarts or primal weight");
    denoise->add_option("--out", da.out, "Output directory")->required();
    denoise->add_flag("--dump-operator", da.dump_operator,
                      "Write the assembled operator as (row,col,value) triplets");

    VerifyArgs va;
    auto* verify = app.add_subcommand("verify", "Run the numerical verification suite");
    verify->add_option("--out", va.out, "Directory for verify.csv");
    verify->add_option("--corrupt-cdiag", va.corrupt_cdiag)->group("");

    CompareArgs ca;
    auto* compare = app.add_subcommand("compare", "PSNR/SSIM table and squared-error images");
    compare->add_option("--clean", ca.clean, "Ground truth")->required();
    compare->add_option("--noisy", ca.noisy, "Noisy input")->required();
    compare->add_option("results", ca.results, "Results as name=path or path");
    compare->add_option("--out", ca.out, "Output directory")->required();

    std::string manifest, replay_out;
    auto* replay = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
    replay->add_option("manifest", manifest, "manifest.json")->required();
    replay->add_option("--out", replay_out, "Override the recorded output directory");

    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return usage;
    }
    da.m_set = m_opt->count() > 0;
    da.gamma_set = gamma_opt->count() > 0;
    da.iterate_set = iterate_opt->count() > 0;

    if (synth->parsed()) return cmd_synth(sa);
    if (denoise->parsed()) return cmd_denoise(da);
    if (verify->parsed()) return cmd_verify(va);
    if (compare->parsed()) return cmd_compare(ca);
    return cmd_replay(manifest, replay_out);
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(std::vector<std::string>(argv + 1, argv + argc));
    } catch (const nlh::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return numerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return usage;
    }
}
