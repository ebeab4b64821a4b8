#include "edgeslice/cli.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code = 0;
    std::string out;
    std::string err;
};

Outcome cli(std::vector<std::string> args) {
    args.insert(args.begin(), "edgeslice");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = edgeslice::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const std::string fixture = std::string(EDGESLICE_TEST_DIR) + "/../configs/convex_fixture.json";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("missing config is reported") {
    const Outcome o = cli({"run", "--config", "missing.toml", "--out", "x"});
    CHECK(o.code != 0);
    CHECK(o.err.find("config not found") != std::string::npos);
}

TEST_CASE("usage errors") {
    CHECK(cli({}).code != 0);
    CHECK(cli({"run", "--config", fixture}).code != 0);  // --out is required
    CHECK(cli({"frobnicate"}).code != 0);
    const Outcome bad = cli({"train", "--config", fixture, "--out", (fs::temp_directory_path() / "es_x").string()});
    CHECK(bad.code == 2);  // the fixture's oracle policy has nothing to train
}

TEST_CASE("run and report") {
    const fs::path dir = fs::temp_directory_path() / "edgeslice_cli_run";
    fs::remove_all(dir);
    const Outcome o = cli({"run", "--config", fixture, "--out", dir.string()});
    REQUIRE(o.code == 0);
    CHECK(o.out.find("converged") != std::string::npos);
    CHECK(fs::exists(dir / "periods.csv"));
    const Outcome r = cli({"report", "--run", dir.string()});
    CHECK(r.code == 0);
    CHECK(slurp(dir / "report.csv").rfind("# edgeslice report v1", 0) == 0);

    const Outcome g = cli({"grid", "--config", fixture, "--out", dir.string(), "--granularity", "0.5"});
    CHECK(g.code == 0);
    CHECK(fs::exists(dir / "grid_slice_0.csv"));
    CHECK(fs::exists(dir / "grid_slice_1.csv"));
}

TEST_CASE("taro run with seed override is reproducible") {
    const fs::path a = fs::temp_directory_path() / "edgeslice_cli_a", b = fs::temp_directory_path() / "edgeslice_cli_b";
    fs::remove_all(a);
    fs::remove_all(b);
    REQUIRE(cli({"run", "--config", fixture, "--policy", "taro", "--seed", "5", "--out", a.string()}).code == 0);
    REQUIRE(cli({"run", "--config", fixture, "--policy", "taro", "--seed", "5", "--out", b.string()}).code == 0);
    for (const char* f : {"intervals.csv", "periods.csv", "coordination.csv", "summary.csv", "config.json"}) {
        CAPTURE(f);
        CHECK(slurp(a / f) == slurp(b / f));
    }
}

}
