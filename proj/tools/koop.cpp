#include <CLI11.hpp>
#include <json.hpp>

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "koop/control.hpp"
#include "koop/io.hpp"

namespace {

using json = nlohmann::json;
using namespace koop;

// ---------------------------------------------------------------------------
// Config loading. The format is a versioned JSON document; see README.md for
// the schema. Every getter reports the dotted path of the offending key so
// mistakes are locatable without a schema in hand.

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot read " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

/// Parses the config file, turning parse failures into line:column messages.
json parse_config_text(const std::string& path, const std::string& text)
{
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        size_t line = 1;
        size_t column = 1;
        const size_t stop = std::min(e.byte > 0 ? e.byte - 1 : 0, text.size());
        for (size_t i = 0; i < stop; ++i) {
            if (text[i] == '\n') {
                ++line;
                column = 1;
            } else {
                ++column;
            }
        }
        throw ValidationError(path + ":" + std::to_string(line) + ":" +
                              std::to_string(column) + ": " + e.what());
    }
}

/// Rejects keys outside the documented schema instead of ignoring typos.
void expect_keys(const json& obj, const std::string& where,
                 std::initializer_list<const char*> allowed)
{
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* key : allowed) {
            if (item.key() == key) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw ValidationError(where + ": unknown key '" + item.key() + "'");
        }
    }
}

const json& require_key(const json& obj, const std::string& where, const char* key)
{
    const auto it = obj.find(key);
    if (it == obj.end()) {
        throw ValidationError(where + ": missing required key '" + key + "'");
    }
    return *it;
}

double as_number(const json& value, const std::string& where)
{
    if (!value.is_number()) {
        throw ValidationError(where + ": expected a number");
    }
    return value.get<double>();
}

double number_at(const json& obj, const std::string& where, const char* key)
{
    return as_number(require_key(obj, where, key), where + "." + key);
}

double number_or(const json& obj, const std::string& where, const char* key,
                 double fallback)
{
    const auto it = obj.find(key);
    return it == obj.end() ? fallback : as_number(*it, where + "." + key);
}

Index index_at(const json& obj, const std::string& where, const char* key)
{
    const double v = number_at(obj, where, key);
    const auto n = static_cast<Index>(v);
    if (static_cast<double>(n) != v || n < 0) {
        throw ValidationError(where + "." + key + ": expected a non-negative integer");
    }
    return n;
}

std::string string_at(const json& obj, const std::string& where, const char* key)
{
    const json& value = require_key(obj, where, key);
    if (!value.is_string()) {
        throw ValidationError(where + "." + key + ": expected a string");
    }
    return value.get<std::string>();
}

std::string string_or(const json& obj, const std::string& where, const char* key,
                      const std::string& fallback)
{
    return obj.contains(key) ? string_at(obj, where, key) : fallback;
}

std::vector<double> numbers_or(const json& obj, const std::string& where,
                               const char* key, std::vector<double> fallback)
{
    const auto it = obj.find(key);
    if (it == obj.end()) {
        return fallback;
    }
    if (!it->is_array()) {
        throw ValidationError(where + "." + key + ": expected an array of numbers");
    }
    std::vector<double> values;
    for (size_t i = 0; i < it->size(); ++i) {
        values.push_back(
            as_number((*it)[i], where + "." + key + "[" + std::to_string(i) + "]"));
    }
    return values;
}

struct BumpConfig {
    double center = 0.5;
    double width = 0.2;
    double amplitude = 1.0;

    [[nodiscard]] json resolved() const
    {
        return json{{"center", center}, {"width", width}, {"amplitude", amplitude}};
    }
};

BumpConfig parse_bump(const json& obj, const std::string& where)
{
    expect_keys(obj, where, {"center", "width", "amplitude"});
    BumpConfig bump;
    bump.center = number_at(obj, where, "center");
    bump.width = number_at(obj, where, "width");
    bump.amplitude = number_or(obj, where, "amplitude", 1.0);
    return bump;
}

struct SystemConfig {
    std::string name;
    std::vector<double> x0;          // integrated systems
    std::vector<double> direction;   // zero_homogeneous
    double lambda = 0.1;             // zero_homogeneous
    Index points = 200;              // synthetic_pde
    double lambda1 = 0.1;            // synthetic_pde
    double lambda2 = 1.0 / 30.0;     // synthetic_pde
    BumpConfig bump1{0.35, 0.18, 1.0};
    BumpConfig bump2{0.70, 0.22, 0.8};
    double noise_sigma = 0.0;

    [[nodiscard]] json resolved() const
    {
        json doc{{"name", name}, {"noise_sigma", noise_sigma}};
        if (name == "synthetic_pde") {
            doc["points"] = points;
            doc["lambda1"] = lambda1;
            doc["lambda2"] = lambda2;
            doc["bump1"] = bump1.resolved();
            doc["bump2"] = bump2.resolved();
        } else if (name == "zero_homogeneous") {
            doc["direction"] = direction;
            doc["lambda"] = lambda;
        } else {
            doc["x0"] = x0;
        }
        return doc;
    }
};

SystemConfig parse_system(const json& obj, const std::string& where)
{
    SystemConfig sys;
    sys.name = string_at(obj, where, "name");
    if (sys.name == "synthetic_pde") {
        expect_keys(obj, where,
                    {"name", "points", "lambda1", "lambda2", "bump1", "bump2",
                     "noise_sigma"});
        sys.points = index_at(obj, where, "points");
        sys.lambda1 = number_at(obj, where, "lambda1");
        sys.lambda2 = number_at(obj, where, "lambda2");
        if (obj.contains("bump1")) {
            sys.bump1 = parse_bump(obj["bump1"], where + ".bump1");
        }
        if (obj.contains("bump2")) {
            sys.bump2 = parse_bump(obj["bump2"], where + ".bump2");
        }
    } else if (sys.name == "zero_homogeneous") {
        expect_keys(obj, where, {"name", "direction", "lambda", "noise_sigma"});
        sys.direction = numbers_or(obj, where, "direction", {});
        if (sys.direction.empty()) {
            throw ValidationError(where + ".direction: at least one component is required");
        }
        sys.lambda = number_at(obj, where, "lambda");
    } else if (sys.name == "finite_time" || sys.name == "nonlinear_2d" ||
               sys.name == "bistable_cubic") {
        expect_keys(obj, where, {"name", "x0", "noise_sigma"});
        const std::vector<double> fallback =
            sys.name == "finite_time"     ? std::vector<double>{1.0}
            : sys.name == "nonlinear_2d"  ? std::vector<double>{1.0, 1.0}
                                          : std::vector<double>{-0.5};
        sys.x0 = numbers_or(obj, where, "x0", fallback);
    } else {
        throw ValidationError(where + ".name: unknown system '" + sys.name + "'");
    }
    sys.noise_sigma = number_or(obj, where, "noise_sigma", 0.0);
    if (sys.noise_sigma < 0) {
        throw ValidationError(where + ".noise_sigma: must be non-negative");
    }
    return sys;
}

struct GridConfig {
    double start = 0.0;
    double end = 1.0;
    Index samples = 101;

    [[nodiscard]] json resolved() const
    {
        return json{{"start", start}, {"end", end}, {"samples", samples}};
    }
};

GridConfig parse_grid(const json& obj, const std::string& where)
{
    expect_keys(obj, where, {"start", "end", "samples"});
    GridConfig grid;
    grid.start = number_at(obj, where, "start");
    grid.end = number_at(obj, where, "end");
    grid.samples = index_at(obj, where, "samples");
    if (grid.samples < 2) {
        throw ValidationError(where + ".samples: at least two samples are required");
    }
    if (!(grid.end > grid.start)) {
        throw ValidationError(where + ": end must exceed start");
    }
    return grid;
}

ProfileKind parse_kind(const std::string& name, const std::string& where)
{
    if (name == "exponential") return ProfileKind::Exponential;
    if (name == "truncated_linear") return ProfileKind::TruncatedLinear;
    if (name == "truncated_power") return ProfileKind::TruncatedPower;
    throw ValidationError(where + ": unknown profile kind '" + name + "'");
}

struct DictionaryConfig {
    ProfileKind kind = ProfileKind::TruncatedLinear;
    double power = 2.0;
    double lambda_lo = 0.005;
    double lambda_hi = 1.0;
    Index count = 198;
    std::string spacing = "log";
    std::vector<double> include;

    [[nodiscard]] json resolved() const
    {
        return json{{"kind", to_string(kind)},     {"power", power},
                    {"lambda_lo", lambda_lo},      {"lambda_hi", lambda_hi},
                    {"count", count},              {"spacing", spacing},
                    {"include", include}};
    }

    [[nodiscard]] std::vector<double> lambdas() const
    {
        if (spacing == "log") {
            return lambda_grid(lambda_lo, lambda_hi, static_cast<int>(count), include);
        }
        std::vector<double> values;
        for (Index i = 0; i < count; ++i) {
            const double frac =
                count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
            values.push_back(lambda_lo + frac * (lambda_hi - lambda_lo));
        }
        values.insert(values.end(), include.begin(), include.end());
        std::sort(values.begin(), values.end());
        values.erase(std::unique(values.begin(), values.end(),
                                 [](double a, double b) {
                                     return std::abs(a - b) <=
                                            1e-12 * std::max(std::abs(a), std::abs(b));
                                 }),
                     values.end());
        return values;
    }
};

DictionaryConfig parse_dictionary(const json& obj, const std::string& where)
{
    expect_keys(obj, where,
                {"kind", "power", "lambda_lo", "lambda_hi", "count", "spacing",
                 "include"});
    DictionaryConfig dict;
    dict.kind = parse_kind(string_or(obj, where, "kind", "truncated_linear"),
                           where + ".kind");
    dict.power = number_or(obj, where, "power", 2.0);
    dict.lambda_lo = number_at(obj, where, "lambda_lo");
    dict.lambda_hi = number_at(obj, where, "lambda_hi");
    dict.count = index_at(obj, where, "count");
    dict.spacing = string_or(obj, where, "spacing", "log");
    if (dict.spacing != "log" && dict.spacing != "linear") {
        throw ValidationError(where + ".spacing: expected 'log' or 'linear'");
    }
    dict.include = numbers_or(obj, where, "include", {});
    if (!(dict.lambda_lo > 0) || !(dict.lambda_hi > dict.lambda_lo)) {
        throw ValidationError(where + ": need 0 < lambda_lo < lambda_hi");
    }
    if (dict.count < 1) {
        throw ValidationError(where + ".count: at least one atom is required");
    }
    return dict;
}

struct SolverConfig {
    int sweep_points = 10;
    double sweep_decades = 4.0;
    double tol = 1e-8;
    std::string rank_kind = "energy";
    double rank_value = 0.9999;

    [[nodiscard]] json resolved() const
    {
        return json{{"sweep_points", sweep_points},
                    {"sweep_decades", sweep_decades},
                    {"tol", tol},
                    {"rank", json{{"kind", rank_kind}, {"value", rank_value}}}};
    }

    [[nodiscard]] RankRule rank_rule() const
    {
        if (rank_kind == "fixed") {
            return RankRule::fixed(static_cast<Index>(rank_value));
        }
        return RankRule::energy_fraction(rank_value);
    }
};

SolverConfig parse_solver(const json& obj, const std::string& where)
{
    expect_keys(obj, where, {"sweep_points", "sweep_decades", "tol", "rank"});
    SolverConfig solver;
    solver.sweep_points =
        static_cast<int>(number_or(obj, where, "sweep_points", solver.sweep_points));
    solver.sweep_decades = number_or(obj, where, "sweep_decades", solver.sweep_decades);
    solver.tol = number_or(obj, where, "tol", solver.tol);
    if (solver.sweep_points < 1) {
        throw ValidationError(where + ".sweep_points: at least one point is required");
    }
    if (!(solver.tol > 0)) {
        throw ValidationError(where + ".tol: must be positive");
    }
    if (const auto it = obj.find("rank"); it != obj.end()) {
        const std::string rank_where = where + ".rank";
        expect_keys(*it, rank_where, {"kind", "value"});
        solver.rank_kind = string_at(*it, rank_where, "kind");
        solver.rank_value = number_at(*it, rank_where, "value");
        if (solver.rank_kind == "fixed") {
            const auto r = static_cast<Index>(solver.rank_value);
            if (static_cast<double>(r) != solver.rank_value || r < 1) {
                throw ValidationError(rank_where + ".value: expected a positive integer");
            }
        } else if (solver.rank_kind == "energy") {
            if (!(solver.rank_value > 0) || solver.rank_value > 1) {
                throw ValidationError(rank_where + ".value: expected a fraction in (0, 1]");
            }
        } else {
            throw ValidationError(rank_where + ".kind: expected 'fixed' or 'energy'");
        }
    }
    return solver;
}

struct KefSectionConfig {
    double alpha = 1.0;
    double beta = 0.0;
    double fit_margin = 0.5;
    double equilibrium_tol = 1e-6;

    [[nodiscard]] json resolved() const
    {
        return json{{"alpha", alpha},
                    {"beta", beta},
                    {"fit_margin", fit_margin},
                    {"equilibrium_tol", equilibrium_tol}};
    }
};

KefSectionConfig parse_kef(const json& obj, const std::string& where)
{
    expect_keys(obj, where, {"alpha", "beta", "fit_margin", "equilibrium_tol"});
    KefSectionConfig kef;
    kef.alpha = number_or(obj, where, "alpha", kef.alpha);
    kef.beta = number_or(obj, where, "beta", kef.beta);
    kef.fit_margin = number_or(obj, where, "fit_margin", kef.fit_margin);
    kef.equilibrium_tol = number_or(obj, where, "equilibrium_tol", kef.equilibrium_tol);
    if (kef.alpha == 0) {
        throw ValidationError(where + ".alpha: must be nonzero");
    }
    return kef;
}

struct ControlSectionConfig {
    double x0 = -0.5;
    double target = 0.7;
    double gain = 1.0;
    double horizon = 20.0;
    Index samples = 2001;
    std::string cancel = "exact";
    double bound = 0.99;

    [[nodiscard]] json resolved() const
    {
        return json{{"x0", x0},         {"target", target},   {"gain", gain},
                    {"horizon", horizon}, {"samples", samples}, {"cancel", cancel},
                    {"bound", bound}};
    }
};

ControlSectionConfig parse_control(const json& obj, const std::string& where)
{
    expect_keys(obj, where,
                {"x0", "target", "gain", "horizon", "samples", "cancel", "bound"});
    ControlSectionConfig ctl;
    ctl.x0 = number_or(obj, where, "x0", ctl.x0);
    ctl.target = number_or(obj, where, "target", ctl.target);
    ctl.gain = number_or(obj, where, "gain", ctl.gain);
    ctl.horizon = number_or(obj, where, "horizon", ctl.horizon);
    if (obj.contains("samples")) {
        ctl.samples = index_at(obj, where, "samples");
    }
    ctl.cancel = string_or(obj, where, "cancel", ctl.cancel);
    ctl.bound = number_or(obj, where, "bound", ctl.bound);
    if (ctl.cancel != "exact" && ctl.cancel != "eigenfunction") {
        throw ValidationError(where + ".cancel: expected 'exact' or 'eigenfunction'");
    }
    if (!(ctl.horizon > 0) || ctl.samples < 2) {
        throw ValidationError(where + ": need a positive horizon and at least two samples");
    }
    if (!(ctl.bound > 0) || ctl.bound >= 1) {
        throw ValidationError(where + ".bound: expected a bound in (0, 1)");
    }
    return ctl;
}

struct ExperimentConfig {
    std::string experiment = "unnamed";
    std::uint64_t seed = 0;
    std::optional<SystemConfig> system;
    GridConfig grid;
    DictionaryConfig dictionary;
    SolverConfig solver;
    KefSectionConfig kef;
    ControlSectionConfig control;

    /// The config with every default made explicit, as embedded in outputs.
    [[nodiscard]] json resolved() const
    {
        json doc{{"version", 1},
                 {"experiment", experiment},
                 {"seed", seed},
                 {"grid", grid.resolved()},
                 {"dictionary", dictionary.resolved()},
                 {"solver", solver.resolved()},
                 {"kef", kef.resolved()},
                 {"control", control.resolved()}};
        if (system) {
            doc["system"] = system->resolved();
        }
        return doc;
    }
};

ExperimentConfig load_config(const std::string& path,
                             const std::optional<std::uint64_t>& seed_override)
{
    const json doc = parse_config_text(path, read_file(path));
    if (!doc.is_object()) {
        throw ValidationError(path + ": config root must be an object");
    }
    const std::string where = "config";
    expect_keys(doc, where,
                {"version", "experiment", "seed", "system", "grid", "dictionary",
                 "solver", "kef", "control"});
    const json& version = require_key(doc, where, "version");
    if (!version.is_number_integer() || version.get<int>() != 1) {
        throw ValidationError(where + ".version: this tool reads config version 1");
    }
    ExperimentConfig cfg;
    cfg.experiment = string_or(doc, where, "experiment", cfg.experiment);
    if (const auto it = doc.find("seed"); it != doc.end()) {
        if (!it->is_number_integer()) {
            throw ValidationError(where + ".seed: expected an integer");
        }
        cfg.seed = it->get<std::uint64_t>();
    }
    if (seed_override) {
        cfg.seed = *seed_override;
    }
    if (const auto it = doc.find("system"); it != doc.end()) {
        cfg.system = parse_system(*it, where + ".system");
    }
    if (const auto it = doc.find("grid"); it != doc.end()) {
        cfg.grid = parse_grid(*it, where + ".grid");
    }
    if (const auto it = doc.find("dictionary"); it != doc.end()) {
        cfg.dictionary = parse_dictionary(*it, where + ".dictionary");
    }
    if (const auto it = doc.find("solver"); it != doc.end()) {
        cfg.solver = parse_solver(*it, where + ".solver");
    }
    if (const auto it = doc.find("kef"); it != doc.end()) {
        cfg.kef = parse_kef(*it, where + ".kef");
    }
    if (const auto it = doc.find("control"); it != doc.end()) {
        cfg.control = parse_control(*it, where + ".control");
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// Provenance and output plumbing.

std::string hash_string(std::uint64_t hash)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "fnv1a64:%016" PRIx64, hash);
    return buf;
}

/// The blob embedded under "provenance" in every JSON output: the command,
/// the fully resolved config, and a content hash per input file.
std::string provenance_blob(const std::string& command, const json& resolved_config,
                            const std::vector<std::string>& inputs)
{
    json doc{{"command", command}, {"config", resolved_config}};
    json hashed = json::object();
    for (const std::string& path : inputs) {
        hashed[path] = hash_string(content_hash(path));
    }
    doc["inputs"] = std::move(hashed);
    return doc.dump();
}

std::string out_path(const std::string& out_dir, const std::string& name)
{
    return (std::filesystem::path(out_dir) / name).string();
}

void ensure_out_dir(const std::string& out_dir)
{
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) {
        throw ValidationError("cannot create output directory " + out_dir + ": " +
                              ec.message());
    }
}

Vector to_vector(const std::vector<double>& values)
{
    Vector v(static_cast<Index>(values.size()));
    for (Index i = 0; i < v.size(); ++i) {
        v(i) = values[static_cast<size_t>(i)];
    }
    return v;
}

// ---------------------------------------------------------------------------
// Subcommands.

Trajectory build_trajectory(const ExperimentConfig& cfg)
{
    if (!cfg.system) {
        throw ValidationError("config.system: section is required for simulate");
    }
    const SystemConfig& sys = *cfg.system;
    const TimeGrid grid = TimeGrid::uniform(cfg.grid.start, cfg.grid.end,
                                            cfg.grid.samples);
    Trajectory traj;
    if (sys.name == "synthetic_pde") {
        const Vector v1 = bump_profile(sys.points, sys.bump1.center, sys.bump1.width,
                                       sys.bump1.amplitude);
        const Vector v2 = bump_profile(sys.points, sys.bump2.center, sys.bump2.width,
                                       sys.bump2.amplitude);
        traj = synthetic_pde_trajectory(v1, sys.lambda1, v2, sys.lambda2, grid);
    } else if (sys.name == "zero_homogeneous") {
        traj = zero_homogeneous_trajectory(to_vector(sys.direction), sys.lambda, grid);
    } else {
        const SystemSpec spec = sys.name == "finite_time"    ? finite_time_system()
                                : sys.name == "nonlinear_2d" ? nonlinear_2d_system()
                                                             : bistable_cubic_system();
        const Vector x0 = to_vector(sys.x0);
        if (x0.size() != spec.dim) {
            throw ValidationError("config.system.x0: expected " +
                                  std::to_string(spec.dim) + " components");
        }
        traj = integrate(spec, x0, grid);
    }
    if (sys.noise_sigma > 0) {
        std::mt19937_64 rng(cfg.seed);
        std::normal_distribution<double> noise(0.0, sys.noise_sigma);
        for (Index k = 0; k < traj.samples(); ++k) {
            for (Index i = 0; i < traj.dim(); ++i) {
                traj.states(i, k) += noise(rng);
            }
        }
    }
    return traj;
}

int cmd_simulate(const ExperimentConfig& cfg, const std::string& out_dir)
{
    const Trajectory traj = build_trajectory(cfg);
    ensure_out_dir(out_dir);
    save_trajectory_csv(traj, out_path(out_dir, "trajectory.csv"));
    std::cout << "wrote trajectory.csv: " << traj.dim() << " states x "
              << traj.samples() << " samples\n";
    return 0;
}

int cmd_dmd(const ExperimentConfig& cfg, const std::string& out_dir,
            const std::string& traj_path)
{
    const Trajectory traj = load_trajectory_csv(traj_path);
    const DmdResult res = dmd(traj, cfg.solver.rank_rule());
    const Matrix recon = dmd_reconstruct_all(res, traj.samples());
    const ErrorReport err = reconstruction_error(traj.states, recon);
    ensure_out_dir(out_dir);
    save_dmd_json(res, out_path(out_dir, "dmd.json"),
                  provenance_blob("dmd", cfg.resolved(), {traj_path}));
    save_matrix_csv(recon, out_path(out_dir, "dmd_reconstruction.csv"));
    save_error_csv(traj.grid.points, err.per_column,
                   out_path(out_dir, "dmd_error.csv"));
    std::cout << "dmd rank " << res.rank << ", relative error "
              << err.relative_frobenius << "\n";
    return 0;
}

int cmd_sparse(const ExperimentConfig& cfg, const std::string& out_dir,
               const std::string& traj_path)
{
    const Trajectory traj = load_trajectory_csv(traj_path);
    const ProfileFamily family{cfg.dictionary.kind, cfg.dictionary.lambdas(),
                               cfg.dictionary.power};
    const ProfileDictionary dict = build_dictionary(family, traj.grid);
    const RegSweep sweep =
        choose_regularization(traj.states, dict, cfg.solver.sweep_points,
                              cfg.solver.sweep_decades, cfg.solver.tol);
    const SparseDecomposition& dec = sweep.decomposition;
    const Matrix recon = sparse_reconstruct(dec);
    const ErrorReport err = reconstruction_error(traj.states, recon);

    Matrix table(static_cast<Index>(sweep.points.size()), 6);
    for (size_t i = 0; i < sweep.points.size(); ++i) {
        const RegSweepPoint& p = sweep.points[i];
        const auto row = static_cast<Index>(i);
        table(row, 0) = p.reg;
        table(row, 1) = p.converged ? 1.0 : 0.0;
        table(row, 2) = static_cast<double>(p.lasso_support);
        table(row, 3) = p.lasso_residual;
        table(row, 4) = static_cast<double>(p.refit_support);
        table(row, 5) = p.refit_residual;
    }

    ensure_out_dir(out_dir);
    save_sparse_json(dec, out_path(out_dir, "sparse.json"),
                     provenance_blob("sparse", cfg.resolved(), {traj_path}));
    save_matrix_csv(dec.modes, out_path(out_dir, "sparse_modes.csv"));
    save_matrix_csv(recon, out_path(out_dir, "sparse_reconstruction.csv"));
    save_error_csv(traj.grid.points, err.per_column,
                   out_path(out_dir, "sparse_error.csv"));
    save_matrix_csv(table, out_path(out_dir, "sparse_sweep.csv"));
    std::cout << "sparse support " << dec.selected_atoms.size() << " at reg "
              << dec.regularization << ", relative error " << err.relative_frobenius
              << "\n";
    return 0;
}

int cmd_kef(const ExperimentConfig& cfg, const std::string& out_dir,
            const std::string& dec_path, const std::string& traj_path)
{
    const SparseDecomposition dec = load_sparse_json(dec_path);
    const Trajectory traj = load_trajectory_csv(traj_path);
    if (dec.selected_atoms.empty()) {
        throw ValidationError(dec_path + ": decomposition selects no atoms");
    }
    if (dec.modes.rows() != traj.dim()) {
        throw ValidationError("decomposition modes and trajectory disagree in dimension");
    }

    std::vector<double> lambdas(dec.selected_lambdas.data(),
                                dec.selected_lambdas.data() + dec.selected_lambdas.size());
    std::sort(lambdas.begin(), lambdas.end());
    const ProfileFamily family{dec.kind, lambdas, dec.power};

    std::vector<double> vanishing;
    if (dec.kind != ProfileKind::Exponential) {
        for (double lambda : lambdas) {
            vanishing.push_back(1.0 / lambda);
        }
    }
    const std::vector<Window> windows =
        extinction_windows(traj, cfg.kef.equilibrium_tol, vanishing);

    // Each eigenfunction must read its own profile in isolation, so states
    // are projected through the dual basis; for orthogonal or single modes
    // this reduces to the plain normalized projection.
    const Matrix gram = dec.modes.transpose() * dec.modes;
    const Eigen::LLT<Matrix> llt(gram);
    if (llt.info() != Eigen::Success) {
        throw IllConditionedModes("mode Gram matrix is not positive definite");
    }
    const Matrix dual =
        dec.modes * llt.solve(Matrix::Identity(gram.rows(), gram.cols()));

    const std::string prov =
        provenance_blob("kef", cfg.resolved(), {dec_path, traj_path});
    double worst = 0.0;
    for (Index k = 0; k < dec.selected_lambdas.size(); ++k) {
        const Vector reader = dual.col(k) / dual.col(k).squaredNorm();
        const Kef kef = kef_from_mapping(family, dec.selected_lambdas(k), reader,
                                         cfg.kef.alpha, cfg.kef.beta);
        const ResidualStats stats = eigen_residual(kef, traj, windows);
        worst = std::max(worst, stats.max_residual);
        if (k == 0) {
            ensure_out_dir(out_dir);
        }
        save_kef_report_json(kef, stats, windows,
                             out_path(out_dir,
                                      "kef_report_" + std::to_string(k) + ".json"),
                             prov);
    }

    const EigenfunctionalSeries series =
        eigenfunctional_series(dec, traj, cfg.kef.fit_margin);
    Matrix stacked(series.series.rows() + 1, traj.samples());
    stacked.row(0) = traj.grid.points.transpose();
    stacked.bottomRows(series.series.rows()) = series.series;
    save_matrix_csv(stacked, out_path(out_dir, "eigenfunctional_series.csv"));

    Matrix fits(static_cast<Index>(series.fits.size()), 5);
    for (size_t i = 0; i < series.fits.size(); ++i) {
        const SeriesFit& fit = series.fits[i];
        const auto row = static_cast<Index>(i);
        fits(row, 0) = fit.slope;
        fits(row, 1) = fit.intercept;
        fits(row, 2) = fit.rms;
        fits(row, 3) = fit.fit_end;
        fits(row, 4) = fit.max_post_deviation;
    }
    save_matrix_csv(fits, out_path(out_dir, "series_fits.csv"));
    std::cout << "kef reports for " << dec.selected_lambdas.size()
              << " atoms, worst eigen residual " << worst << "\n";
    return 0;
}

int cmd_control(const ExperimentConfig& cfg, const std::string& out_dir)
{
    const ControlSectionConfig& ctl = cfg.control;
    const SystemSpec sys = bistable_cubic_system();
    Vector target(1);
    target(0) = ctl.target;

    Controller controller;
    controller.cancel_term = ctl.cancel == "exact"
                                 ? bistable_cubic_cancel()
                                 : feedback_linearize(bistable_cubic_kef(), sys);
    controller.outer_law = proportional_law(target, ctl.gain);
    controller.target = target;
    const double bound = ctl.bound;
    controller.admissible = [bound](const Vector& x) {
        return std::abs(x(0)) < bound;
    };

    Vector x0(1);
    x0(0) = ctl.x0;
    const TimeGrid grid = TimeGrid::uniform(0.0, ctl.horizon, ctl.samples);
    const ClosedLoopResult result = simulate_closed_loop(sys, controller, x0, grid);

    ensure_out_dir(out_dir);
    save_closed_loop_json(result, out_path(out_dir, "closed_loop.json"),
                          provenance_blob("control", cfg.resolved(), {}));
    save_trajectory_csv(result.trajectory,
                        out_path(out_dir, "closed_loop_trajectory.csv"));
    std::cout << "closed loop final error " << result.final_error
              << ", settling time " << result.settling_time << "\n";
    return 0;
}

int cmd_compare(const std::optional<ExperimentConfig>& cfg, const std::string& out_dir,
                const std::string& first_path, const std::string& second_path)
{
    const auto [first_times, first_errors] = load_error_csv(first_path);
    const auto [second_times, second_errors] = load_error_csv(second_path);

    std::vector<double> times;
    std::vector<double> first;
    std::vector<double> second;
    Index i = 0;
    Index j = 0;
    while (i < first_times.size() && j < second_times.size()) {
        if (first_times(i) == second_times(j)) {
            times.push_back(first_times(i));
            first.push_back(first_errors(i));
            second.push_back(second_errors(j));
            ++i;
            ++j;
        } else if (first_times(i) < second_times(j)) {
            ++i;
        } else {
            ++j;
        }
    }
    if (times.empty()) {
        throw ValidationError("the error curves share no time samples");
    }

    double first_sq = 0.0;
    double second_sq = 0.0;
    for (size_t k = 0; k < times.size(); ++k) {
        first_sq += first[k] * first[k];
        second_sq += second[k] * second[k];
    }
    const double first_rms = std::sqrt(first_sq / static_cast<double>(times.size()));
    const double second_rms = std::sqrt(second_sq / static_cast<double>(times.size()));
    double ratio = 1.0;
    if (first_rms != second_rms) {
        if (second_rms == 0.0) {
            throw NumericalError("second error curve is identically zero");
        }
        ratio = first_rms / second_rms;
    }

    json doc{{"error_ratio", ratio},
             {"first_rms", first_rms},
             {"second_rms", second_rms},
             {"shared_samples", times.size()},
             {"times", times},
             {"first", first},
             {"second", second}};
    const json resolved = cfg ? cfg->resolved() : json(nullptr);
    doc["provenance"] = json::parse(
        provenance_blob("compare", resolved, {first_path, second_path}));

    ensure_out_dir(out_dir);
    std::ofstream out(out_path(out_dir, "comparison.json"), std::ios::binary);
    if (!out) {
        throw ValidationError("cannot write " + out_path(out_dir, "comparison.json"));
    }
    out << doc.dump(2) << '\n';
    std::cout << "error ratio " << ratio << " over " << times.size()
              << " shared samples\n";
    return 0;
}

struct CommonArgs {
    std::string config;
    std::string out = ".";
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* sub, CommonArgs& args, bool config_required = true)
{
    auto* config = sub->add_option("--config", args.config,
                                   "experiment config (versioned JSON)");
    config->check(CLI::ExistingFile);
    if (config_required) {
        config->required();
    }
    sub->add_option("--out", args.out, "output directory (created if absent)")
        ->required();
    sub->add_option("--seed", args.seed, "override the config seed");
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Koopman mode decomposition experiments"};
    app.set_version_flag("--version", KOOP_VERSION);
    app.require_subcommand(1);

    CommonArgs args;
    std::string traj_path;
    std::string dec_path;
    std::string first_path;
    std::string second_path;

    CLI::App* simulate = app.add_subcommand("simulate", "integrate a configured system");
    add_common(simulate, args);

    CLI::App* dmd_cmd = app.add_subcommand("dmd", "dynamic mode decomposition");
    add_common(dmd_cmd, args);
    dmd_cmd->add_option("trajectory", traj_path, "trajectory CSV")
        ->required()
        ->check(CLI::ExistingFile);

    CLI::App* sparse_cmd =
        app.add_subcommand("sparse", "sparse decay-profile decomposition");
    add_common(sparse_cmd, args);
    sparse_cmd->add_option("trajectory", traj_path, "trajectory CSV")
        ->required()
        ->check(CLI::ExistingFile);

    CLI::App* kef_cmd =
        app.add_subcommand("kef", "eigenfunction reports from a decomposition");
    add_common(kef_cmd, args);
    kef_cmd->add_option("decomposition", dec_path, "sparse decomposition JSON")
        ->required()
        ->check(CLI::ExistingFile);
    kef_cmd->add_option("trajectory", traj_path, "trajectory CSV")
        ->required()
        ->check(CLI::ExistingFile);

    CLI::App* control_cmd =
        app.add_subcommand("control", "feedback-linearized closed loop");
    add_common(control_cmd, args);

    CLI::App* compare_cmd =
        app.add_subcommand("compare", "error-curve comparison report");
    add_common(compare_cmd, args, false);
    compare_cmd->add_option("first", first_path, "error CSV (numerator)")
        ->required()
        ->check(CLI::ExistingFile);
    compare_cmd->add_option("second", second_path, "error CSV (denominator)")
        ->required()
        ->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
        if (*simulate) {
            return cmd_simulate(load_config(args.config, args.seed), args.out);
        }
        if (*dmd_cmd) {
            return cmd_dmd(load_config(args.config, args.seed), args.out, traj_path);
        }
        if (*sparse_cmd) {
            return cmd_sparse(load_config(args.config, args.seed), args.out, traj_path);
        }
        if (*kef_cmd) {
            return cmd_kef(load_config(args.config, args.seed), args.out, dec_path,
                           traj_path);
        }
        if (*control_cmd) {
            return cmd_control(load_config(args.config, args.seed), args.out);
        }
        std::optional<ExperimentConfig> cfg;
        if (!args.config.empty()) {
            cfg = load_config(args.config, args.seed);
        }
        return cmd_compare(cfg, args.out, first_path, second_path);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e);
        }
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
