#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "koop/io.hpp"

using namespace koop;
using Catch::Matchers::WithinAbs;

namespace {

std::string tmp_path(const std::string& name)
{
    return (std::filesystem::temp_directory_path() / name).string();
}

void write_text(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    out << text;
}

std::string read_text(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

Trajectory damped_rotation(Index count)
{
    Matrix g(2, 2);
    g << 0.98 * std::cos(0.3), -0.98 * std::sin(0.3), 0.98 * std::sin(0.3),
        0.98 * std::cos(0.3);
    Matrix states(2, count);
    states.col(0) << 1.0, 0.5;
    for (Index k = 1; k < count; ++k) {
        states.col(k) = g * states.col(k - 1);
    }
    return Trajectory{std::move(states),
                      TimeGrid::uniform(0.0, 0.1 * static_cast<double>(count - 1), count)};
}

} // namespace

TEST_CASE("doubles survive the decimal round trip")
{
    for (double v : {1.0 / 3.0, 0.1, -2.5e-17, 1e300, 0.0, 12345.678901234567,
                     -9.87654321e-5}) {
        REQUIRE(std::stod(format_double(v)) == v);
    }
    REQUIRE(format_double(0.25) == "0.25");
}

TEST_CASE("content hashing")
{
    const std::string path = tmp_path("koop_io_hash.txt");

    write_text(path, "abc");
    REQUIRE(content_hash(path) == 16654208175385433931ull);

    write_text(path, "abd");
    REQUIRE(content_hash(path) == 16654213672943574986ull);

    write_text(path, "");
    REQUIRE(content_hash(path) == 14695981039346656037ull);

    REQUIRE_THROWS_AS(content_hash(tmp_path("koop_io_missing.txt")), ValidationError);
}

TEST_CASE("trajectory CSV round trip")
{
    const std::string path = tmp_path("koop_io_traj.csv");
    const Trajectory traj = damped_rotation(7);

    save_trajectory_csv(traj, path);
    const Trajectory loaded = load_trajectory_csv(path);

    REQUIRE(loaded.dim() == 2);
    REQUIRE(loaded.samples() == 7);
    REQUIRE((loaded.states.array() == traj.states.array()).all());
    REQUIRE((loaded.grid.points.array() == traj.grid.points.array()).all());
    REQUIRE(loaded.grid.is_uniform());

    SECTION("states and grid must agree on save")
    {
        Trajectory broken{Matrix::Zero(2, 3), TimeGrid::uniform(0.0, 1.0, 4)};
        REQUIRE_THROWS_AS(save_trajectory_csv(broken, path), ShapeMismatch);
    }

    SECTION("a lone time row is not a trajectory")
    {
        write_text(path, "0.0,0.1,0.2\n");
        REQUIRE_THROWS_AS(load_trajectory_csv(path), ValidationError);
    }
}

TEST_CASE("matrix CSV round trip")
{
    const std::string path = tmp_path("koop_io_matrix.csv");
    Matrix m(3, 4);
    m << 1.0 / 3.0, -2.0, 3.5e-9, 0.0, 4.0, 5.0, -6.7e12, 7.0, 8.0, 9.0, 10.0,
        std::sqrt(2.0);

    save_matrix_csv(m, path);
    const Matrix loaded = load_matrix_csv(path);
    REQUIRE(loaded.rows() == 3);
    REQUIRE(loaded.cols() == 4);
    REQUIRE((loaded.array() == m.array()).all());

    SECTION("malformed rows are rejected")
    {
        write_text(path, "1.0,2.0\n3.0,oops\n");
        REQUIRE_THROWS_AS(load_matrix_csv(path), ValidationError);

        write_text(path, "1.0,2.0\n3.0\n");
        REQUIRE_THROWS_AS(load_matrix_csv(path), ValidationError);

        write_text(path, "");
        REQUIRE_THROWS_AS(load_matrix_csv(path), ValidationError);

        REQUIRE_THROWS_AS(load_matrix_csv(tmp_path("koop_io_missing.csv")),
                          ValidationError);
    }

    SECTION("unwritable targets are reported")
    {
        REQUIRE_THROWS_AS(save_matrix_csv(m, "/nonexistent_dir/x.csv"), ValidationError);
    }
}

TEST_CASE("error curve CSV round trip")
{
    const std::string path = tmp_path("koop_io_error.csv");
    Vector times(4), errors(4);
    times << 0.0, 0.5, 1.0, 1.5;
    errors << 1e-3, 2e-3, 4e-3, 8.5e-3;

    save_error_csv(times, errors, path);
    const auto [t, e] = load_error_csv(path);
    REQUIRE((t.array() == times.array()).all());
    REQUIRE((e.array() == errors.array()).all());

    REQUIRE_THROWS_AS(save_error_csv(times, Vector::Zero(3), path), ShapeMismatch);

    write_text(path, "0,1\n2,3\n4,5\n");
    REQUIRE_THROWS_AS(load_error_csv(path), ValidationError);
}

TEST_CASE("decomposition JSON round trip")
{
    const std::string path = tmp_path("koop_io_dmd.json");
    const Trajectory traj = damped_rotation(40);
    const DmdResult res = dmd(traj, RankRule{});
    REQUIRE(res.rank == 2);

    save_dmd_json(res, path);
    const DmdResult loaded = load_dmd_json(path);

    REQUIRE(loaded.rank == res.rank);
    REQUIRE(loaded.dt == res.dt);
    REQUIRE((loaded.eigenvalues.array() == res.eigenvalues.array()).all());
    REQUIRE((loaded.coefficients.array() == res.coefficients.array()).all());
    REQUIRE((loaded.modes.array() == res.modes.array()).all());

    SECTION("provenance is embedded verbatim")
    {
        save_dmd_json(res, path, R"({"seed": 42})");
        const std::string text = read_text(path);
        REQUIRE(text.find("\"provenance\"") != std::string::npos);
        REQUIRE(text.find("\"seed\": 42") != std::string::npos);

        REQUIRE_THROWS_AS(save_dmd_json(res, path, "not json{"), ValidationError);
    }

    SECTION("malformed files are rejected")
    {
        write_text(path, "{ not json");
        REQUIRE_THROWS_AS(load_dmd_json(path), ValidationError);
        REQUIRE_THROWS_AS(load_dmd_json(tmp_path("koop_io_missing.json")),
                          ValidationError);
    }
}

TEST_CASE("sparse decomposition JSON round trip")
{
    const std::string path = tmp_path("koop_io_sparse.json");

    SparseDecomposition dec;
    dec.kind = ProfileKind::TruncatedLinear;
    dec.power = 2.0;
    dec.selected_atoms = {2, 7};
    dec.selected_lambdas.resize(2);
    dec.selected_lambdas << 1.0 / 30.0, 0.1;
    dec.modes.resize(2, 2);
    dec.modes << 0.2, 1.0, -1.0, 0.5;
    dec.refit_dictionary.resize(2, 3);
    dec.refit_dictionary << 1.0, 0.9, 0.8, 1.0, 1.0 / 3.0, 0.0;
    dec.residual = 7.19e-16;
    dec.regularization = 0.05;

    save_sparse_json(dec, path);
    const SparseDecomposition loaded = load_sparse_json(path);

    REQUIRE(loaded.kind == dec.kind);
    REQUIRE(loaded.power == dec.power);
    REQUIRE(loaded.selected_atoms == dec.selected_atoms);
    REQUIRE((loaded.selected_lambdas.array() == dec.selected_lambdas.array()).all());
    REQUIRE((loaded.modes.array() == dec.modes.array()).all());
    REQUIRE((loaded.refit_dictionary.array() == dec.refit_dictionary.array()).all());
    REQUIRE(loaded.residual == dec.residual);
    REQUIRE(loaded.regularization == dec.regularization);

    SECTION("unknown profile kinds are rejected")
    {
        write_text(path, R"({"family": {"kind": "cubic"}})");
        REQUIRE_THROWS_AS(load_sparse_json(path), ValidationError);
    }

    SECTION("payload shape is checked")
    {
        save_sparse_json(dec, path);
        std::string text = read_text(path);
        const std::string needle = "\"rows\": 2";
        text.replace(text.find(needle), needle.size(), "\"rows\": 3");
        write_text(path, text);
        REQUIRE_THROWS_AS(load_sparse_json(path), ValidationError);
    }
}

TEST_CASE("report writers")
{
    SECTION("eigenfunction report")
    {
        const std::string path = tmp_path("koop_io_kef.json");
        const Kef base = kef_analytic("x", Complex{1.0, 0.0}, [](const Vector& x) {
            return Complex{x(0), 0.0};
        });
        const Kef phi = kef_scale(base, 2.0);
        ResidualStats stats;
        stats.max_residual = 3e-7;
        stats.mean_residual = 1e-7;
        stats.evaluated = 899;
        stats.excluded = 100;

        save_kef_report_json(phi, stats, {{0.97, 1.03}}, path, R"({"run": 1})");
        const std::string text = read_text(path);
        REQUIRE(text.find("\"op\": \"scale\"") != std::string::npos);
        REQUIRE(text.find("\"op\": \"analytic\"") != std::string::npos);
        REQUIRE(text.find("\"evaluated\": 899") != std::string::npos);
        REQUIRE(text.find("\"branch_ambiguity\": false") != std::string::npos);
        REQUIRE(text.find("\"lo\": 0.97") != std::string::npos);
        REQUIRE(text.find("\"run\": 1") != std::string::npos);
    }

    SECTION("observability report")
    {
        const std::string path = tmp_path("koop_io_obs.json");
        ObservabilityReport report;
        report.sample_indices = {0, 5};
        report.ranks = {2, 2};
        report.tolerance = 1e-8;
        report.verdict = Observability::Full;

        save_observability_json(report, path);
        const std::string text = read_text(path);
        REQUIRE(text.find("\"verdict\": \"full\"") != std::string::npos);
        REQUIRE(text.find("\"index\": 5") != std::string::npos);

        report.verdict = Observability::Deficient;
        save_observability_json(report, path);
        REQUIRE(read_text(path).find("\"verdict\": \"deficient\"") != std::string::npos);
    }

    SECTION("closed loop report")
    {
        const std::string path = tmp_path("koop_io_loop.json");
        ClosedLoopResult result;
        result.x0 = Vector::Constant(1, -0.5);
        result.target = Vector::Constant(1, 0.7);
        result.final_error = 2.5e-9;
        result.settling_time = 4.788;

        save_closed_loop_json(result, path);
        const std::string text = read_text(path);
        REQUIRE(text.find("\"final_error\"") != std::string::npos);
        REQUIRE(text.find("\"settling_time\": 4.788") != std::string::npos);
        REQUIRE(text.find("-0.5") != std::string::npos);
    }
}
