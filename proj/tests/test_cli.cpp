#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string quoted(const fs::path& path)
{
    return "\"" + path.string() + "\"";
}

/// Runs the tool with the given arguments and returns its exit code.
int run_cli(const std::string& args)
{
    const std::string cmd =
        std::string(KOOP_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

/// Fresh working directory per test case, under the system temp root.
fs::path workspace(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / "koop_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path quick_config()
{
    return fs::path(KOOP_CONFIG_DIR) / "quick_demo.json";
}

std::string read_bytes(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    REQUIRE(out.good());
    out << text;
}

json load_json(const fs::path& path)
{
    return json::parse(read_bytes(path));
}

double number_field(const json& value)
{
    return value.is_string() ? std::stod(value.get<std::string>())
                             : value.get<double>();
}

} // namespace

TEST_CASE("quick demo pipeline recovers the planted decomposition")
{
    const fs::path dir = workspace("pipeline");
    const std::string cfg = "--config " + quoted(quick_config());

    REQUIRE(run_cli("simulate " + cfg + " --out " + quoted(dir)) == 0);
    REQUIRE(fs::exists(dir / "trajectory.csv"));

    REQUIRE(run_cli("sparse " + cfg + " --out " + quoted(dir) + " " +
                    quoted(dir / "trajectory.csv")) == 0);
    const json sparse = load_json(dir / "sparse.json");
    REQUIRE(sparse.at("selected_lambdas").size() == 2);
    const double l0 = number_field(sparse["selected_lambdas"][0]);
    const double l1 = number_field(sparse["selected_lambdas"][1]);
    CHECK(std::min(l0, l1) == Catch::Approx(1.0 / 30.0).epsilon(1e-12));
    CHECK(std::max(l0, l1) == Catch::Approx(0.1).epsilon(1e-12));
    CHECK(number_field(sparse.at("residual")) < 1e-12);

    const json& prov = sparse.at("provenance");
    CHECK(prov.at("command") == "sparse");
    CHECK(prov.at("config").at("experiment") == "quick_demo");
    for (const auto& item : prov.at("inputs").items()) {
        CHECK(item.value().get<std::string>().starts_with("fnv1a64:"));
    }

    REQUIRE(run_cli("dmd " + cfg + " --out " + quoted(dir) + " " +
                    quoted(dir / "trajectory.csv")) == 0);
    REQUIRE(run_cli("kef " + cfg + " --out " + quoted(dir) + " " +
                    quoted(dir / "sparse.json") + " " +
                    quoted(dir / "trajectory.csv")) == 0);
    CHECK(fs::exists(dir / "kef_report_0.json"));
    CHECK(fs::exists(dir / "kef_report_1.json"));
    CHECK(fs::exists(dir / "eigenfunctional_series.csv"));
    CHECK(fs::exists(dir / "series_fits.csv"));

    REQUIRE(run_cli("compare --out " + quoted(dir) + " " +
                    quoted(dir / "dmd_error.csv") + " " +
                    quoted(dir / "sparse_error.csv")) == 0);
    const json comparison = load_json(dir / "comparison.json");
    CHECK(comparison.at("error_ratio").get<double>() > 10.0);
    CHECK(comparison.at("shared_samples").get<int>() == 61);
}

TEST_CASE("reruns with one config produce byte-identical outputs")
{
    const fs::path dir = workspace("rerun");
    const std::string cfg = "--config " + quoted(quick_config());
    const fs::path a = dir / "a";
    const fs::path b = dir / "b";

    REQUIRE(run_cli("simulate " + cfg + " --out " + quoted(a)) == 0);
    REQUIRE(run_cli("simulate " + cfg + " --out " + quoted(b)) == 0);
    CHECK(read_bytes(a / "trajectory.csv") == read_bytes(b / "trajectory.csv"));

    const std::string traj = quoted(a / "trajectory.csv");
    REQUIRE(run_cli("dmd " + cfg + " --out " + quoted(a) + " " + traj) == 0);
    REQUIRE(run_cli("dmd " + cfg + " --out " + quoted(b) + " " + traj) == 0);
    CHECK(read_bytes(a / "dmd.json") == read_bytes(b / "dmd.json"));
    CHECK(read_bytes(a / "dmd_error.csv") == read_bytes(b / "dmd_error.csv"));

    REQUIRE(run_cli("control " + cfg + " --out " + quoted(a)) == 0);
    REQUIRE(run_cli("control " + cfg + " --out " + quoted(b)) == 0);
    CHECK(read_bytes(a / "closed_loop.json") == read_bytes(b / "closed_loop.json"));
    CHECK(read_bytes(a / "closed_loop_trajectory.csv") ==
          read_bytes(b / "closed_loop_trajectory.csv"));
}

TEST_CASE("seeded noise reproduces under the same seed and moves under a new one")
{
    const fs::path dir = workspace("seed");
    write_file(dir / "noisy.json", R"({
  "version": 1,
  "experiment": "noisy_line",
  "seed": 7,
  "system": {"name": "zero_homogeneous", "direction": [1.0, 2.0],
             "lambda": 0.1, "noise_sigma": 0.001},
  "grid": {"start": 0.0, "end": 5.0, "samples": 26}
})");
    const std::string cfg = "--config " + quoted(dir / "noisy.json");

    REQUIRE(run_cli("simulate " + cfg + " --out " + quoted(dir / "a")) == 0);
    REQUIRE(run_cli("simulate " + cfg + " --out " + quoted(dir / "b")) == 0);
    REQUIRE(run_cli("simulate " + cfg + " --seed 8 --out " + quoted(dir / "c")) == 0);
    CHECK(read_bytes(dir / "a" / "trajectory.csv") ==
          read_bytes(dir / "b" / "trajectory.csv"));
    CHECK(read_bytes(dir / "a" / "trajectory.csv") !=
          read_bytes(dir / "c" / "trajectory.csv"));
}

TEST_CASE("config mistakes exit with code 2")
{
    const fs::path dir = workspace("badconfig");
    const std::string out = " --out " + quoted(dir / "out");

    write_file(dir / "version.json", R"({"version": 2})");
    CHECK(run_cli("simulate --config " + quoted(dir / "version.json") + out) == 2);

    write_file(dir / "unknown.json",
               R"({"version": 1, "typo_section": {}, )"
               R"("grid": {"start": 0, "end": 1, "samples": 11}})");
    CHECK(run_cli("simulate --config " + quoted(dir / "unknown.json") + out) == 2);

    write_file(dir / "broken.json", "{\n  \"version\": 1,,\n}\n");
    CHECK(run_cli("simulate --config " + quoted(dir / "broken.json") + out) == 2);

    write_file(dir / "nosystem.json", R"({"version": 1})");
    CHECK(run_cli("simulate --config " + quoted(dir / "nosystem.json") + out) == 2);

    CHECK(run_cli("simulate --config " + quoted(dir / "absent.json") + out) == 2);

    write_file(dir / "ok.json", R"({"version": 1})");
    CHECK(run_cli("dmd --config " + quoted(dir / "ok.json") + out + " " +
                  quoted(dir / "no_trajectory.csv")) == 2);
}

TEST_CASE("numerical failures exit with code 3")
{
    const fs::path dir = workspace("numerical");
    write_file(dir / "outside.json",
               R"({"version": 1, "control": {"x0": 1.5}})");
    CHECK(run_cli("control --config " + quoted(dir / "outside.json") + " --out " +
                  quoted(dir / "out")) == 3);
}

TEST_CASE("comparing a curve with itself reports ratio one")
{
    const fs::path dir = workspace("compare");
    write_file(dir / "curve.csv", "0,1,2\n0.5,0.25,0.125\n");
    REQUIRE(run_cli("compare --out " + quoted(dir) + " " + quoted(dir / "curve.csv") +
                    " " + quoted(dir / "curve.csv")) == 0);
    const json comparison = load_json(dir / "comparison.json");
    CHECK(comparison.at("error_ratio").get<double>() == 1.0);

    write_file(dir / "shifted.csv", "10,11,12\n0.5,0.25,0.125\n");
    CHECK(run_cli("compare --out " + quoted(dir) + " " + quoted(dir / "curve.csv") +
                  " " + quoted(dir / "shifted.csv")) == 2);
}
