#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "nlh/image_io.hpp"
#include "nlh/metrics.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string err;
};

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / "nlh_cli_test" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

Result nlh_cli(const std::string& args) {
    const fs::path err = fs::temp_directory_path() / "nlh_cli_test" / "stderr.txt";
    fs::create_directories(err.parent_path());
    const std::string cmd =
        std::string(NLH_CLI_PATH) + " " + args + " >/dev/null 2>" + err.string();
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream is(err);
    std::stringstream ss;
    ss << is.rdbuf();
    r.err = ss.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    REQUIRE(is);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::string synth_disc(const std::string& name, int n, double sigma) {
    const fs::path dir = scratch(name);
    std::ostringstream args;
    args << "synth disc_slope --n " << n << " --sigma " << sigma << " --seed 1 --out " << dir;
    REQUIRE(nlh_cli(args.str()).code == 0);
    return dir.string();
}

}  // namespace

TEST_CASE("synth is deterministic and sigma 0 gives noisy == clean") {
    const std::string a = synth_disc("synth_a", 64, 0.25);
    const std::string b = synth_disc("synth_b", 64, 0.25);
    CHECK(slurp(fs::path(a) / "clean.pgm") == slurp(fs::path(b) / "clean.pgm"));
    CHECK(slurp(fs::path(a) / "noisy.pgm") == slurp(fs::path(b) / "noisy.pgm"));
    CHECK(fs::exists(fs::path(a) / "manifest.json"));
    CHECK(slurp(fs::path(a) / "clean.pgm") != slurp(fs::path(a) / "noisy.pgm"));

    const std::string z = synth_disc("synth_zero", 32, 0.0);
    CHECK(slurp(fs::path(z) / "clean.pgm") == slurp(fs::path(z) / "noisy.pgm"));
}

TEST_CASE("denoise nlh improves psnr and replays bit-exactly") {
    const fs::path in = synth_disc("dn_in", 32, 0.05);
    const fs::path out = scratch("dn_out");
    const std::string args = "denoise --in " + (in / "noisy.pgm").string() +
                             " --method nlh --M 12 --gamma 0.001 --alpha 1 --p 1 --iterate 2"
                             " --max-iters 4000 --truth " + (in / "clean.pgm").string() +
                             " --dump-operator --out " + out.string();
    REQUIRE(nlh_cli(args).code == 0);
    for (const char* f : {"denoised.pgm", "report.json", "trace.csv", "metrics.csv",
                          "manifest.json", "operator_triplets.csv", "second_differences.csv"}) {
        CHECK_MESSAGE(fs::exists(out / f), f);
    }
    const nlh::ImageGrid clean = nlh::load_image(in / "clean.pgm");
    const nlh::ImageGrid noisy = nlh::load_image(in / "noisy.pgm");
    const nlh::ImageGrid den = nlh::load_image(out / "denoised.pgm");
    CHECK(nlh::psnr(clean, den) > nlh::psnr(clean, noisy) + 5.0);
    CHECK(slurp(out / "report.json").find("wall_time") == std::string::npos);

    const fs::path again = scratch("dn_replay");
    REQUIRE(nlh_cli("replay " + (out / "manifest.json").string() + " --out " + again.string())
                .code == 0);
    for (const char* f : {"denoised.pgm", "report.json", "trace.csv", "metrics.csv",
                          "operator_triplets.csv"}) {
        CHECK_MESSAGE(slurp(out / f) == slurp(again / f), f);
    }
}

TEST_CASE("--iterate k runs k weight passes") {
    const fs::path in = synth_disc("it_in", 24, 0.05);
    const fs::path out = scratch("it_out");
    REQUIRE(nlh_cli("denoise --in " + (in / "noisy.pgm").string() +
                    " --method nlh --iterate 5 --max-iters 300 --out " + out.string())
                .code == 0);
    const std::string report = slurp(out / "report.json");
    std::size_t passes = 0;
    for (auto pos = report.find("iterations_run"); pos != std::string::npos;
         pos = report.find("iterations_run", pos + 1))
        ++passes;
    CHECK(passes == 5);
}

TEST_CASE("tv staircasing shows in the second-difference statistics") {
    const fs::path in = synth_disc("tv_in", 64, 0.25);
    const fs::path out = scratch("tv_out");
    REQUIRE(nlh_cli("denoise --in " + (in / "noisy.pgm").string() +
                    " --method tv --alpha 1.1 --p 1 --out " + out.string())
                .code == 0);
    std::istringstream is(slurp(out / "staircase.csv"));
    std::string header, row;
    std::getline(is, header);
    std::getline(is, row);
    CHECK(header == "zero_fraction,excess_kurtosis");
    const double zero_fraction = std::stod(row.substr(0, row.find(',')));
    const double kurtosis = std::stod(row.substr(row.find(',') + 1));
    CHECK(zero_fraction > 0.5);
    CHECK(kurtosis > 3.0);
}

TEST_CASE("invalid parameters exit 1 naming the flag") {
    const fs::path in = synth_disc("bad_in", 16, 0.0);
    const std::string base = "denoise --in " + (in / "noisy.pgm").string() + " --out " +
                             scratch("bad_out").string();
    struct Case {
        const char* args;
        const char* flag;
    };
    for (const Case& c : {Case{" --method tv --gamma 0.1", "--gamma"},
                          Case{" --method tv --M 12", "--M"},
                          Case{" --method nlh --M 3", "--M"},
                          Case{" --method nlh --p 3", "--p"},
                          Case{" --method tgv2 --alpha1 1", "--alpha0"},
                          Case{" --method nlh --alpha0 1", "--alpha0"},
                          Case{" --method nlh --iterate 0", "--iterate"},
                          Case{" --method foo", "--method"}}) {
        const Result r = nlh_cli(base + c.args);
        CHECK_MESSAGE(r.code == 1, c.args);
        CHECK_MESSAGE(r.err.find(c.flag) != std::string::npos, c.args);
    }
    CHECK(nlh_cli("denoise --in /nonexistent.pgm --out /tmp").code == 1);
    CHECK(nlh_cli("").code == 1);
    CHECK(nlh_cli("frobnicate").code == 1);
}

TEST_CASE("compare writes psnr/ssim rows in input order and error images") {
    const fs::path in = synth_disc("cmp_in", 32, 0.1);
    const fs::path out = scratch("cmp_out");
    const std::string clean = (in / "clean.pgm").string();
    REQUIRE(nlh_cli("compare --clean " + clean + " --noisy " + (in / "noisy.pgm").string() +
                    " perfect=" + clean + " again=" + clean + " --out " + out.string())
                .code == 0);
    std::istringstream is(slurp(out / "compare.csv"));
    std::string line;
    std::getline(is, line);
    CHECK(line == "name,psnr_db,ssim");
    std::getline(is, line);
    CHECK(line.rfind("noisy,", 0) == 0);
    std::getline(is, line);
    CHECK(line == "perfect,inf,1");
    std::getline(is, line);
    CHECK(line.rfind("again,", 0) == 0);

    const nlh::ImageGrid err = nlh::load_image(out / "error_perfect.pgm");
    double worst = 0.0;
    for (std::size_t i = 0; i < err.size(); ++i) worst = std::max(worst, err[i]);
    CHECK(worst == 0.0);

    const fs::path small = synth_disc("cmp_small", 16, 0.0);
    CHECK(nlh_cli("compare --clean " + clean + " --noisy " + (small / "noisy.pgm").string() +
                  " --out " + out.string())
              .code == 1);

    const fs::path again = scratch("cmp_replay");
    REQUIRE(nlh_cli("replay " + (out / "manifest.json").string() + " --out " + again.string())
                .code == 0);
    CHECK(slurp(out / "compare.csv") == slurp(again / "compare.csv"));
    CHECK(slurp(out / "error_noisy.pgm") == slurp(again / "error_noisy.pgm"));
}

TEST_CASE("verify exits 0, writes one row per check, and fails on a corrupted constant") {
    const fs::path out = scratch("verify");
    REQUIRE(nlh_cli("verify --out " + out.string()).code == 0);
    std::istringstream is(slurp(out / "verify.csv"));
    std::string line;
    std::size_t rows = 0, failed = 0;
    std::getline(is, line);
    CHECK(line == "name,measured,expected,tolerance,passed");
    while (std::getline(is, line)) {
        ++rows;
        if (line.ends_with(",false")) ++failed;
    }
    CHECK(rows > 40);
    CHECK(failed == 0);

    const fs::path bad = scratch("verify_bad");
    CHECK(nlh_cli("verify --corrupt-cdiag 1.01 --out " + bad.string()).code == 3);
}
