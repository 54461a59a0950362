#include "koop/io.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace koop {

using nlohmann::json;

namespace {

std::ofstream open_out(const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ValidationError("cannot write " + path);
    }
    return out;
}

std::ifstream open_in(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot read " + path);
    }
    return in;
}

double parse_double(std::string_view text)
{
    double value = 0.0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end) {
        throw ValidationError("malformed number: '" + std::string(text) + "'");
    }
    return value;
}

std::vector<std::vector<double>> load_csv_rows(const std::string& path)
{
    std::ifstream in = open_in(path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        std::vector<double> row;
        size_t start = 0;
        while (start <= line.size()) {
            size_t comma = line.find(',', start);
            if (comma == std::string::npos) {
                comma = line.size();
            }
            row.push_back(parse_double(
                std::string_view(line).substr(start, comma - start)));
            start = comma + 1;
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw ValidationError(path + ": rows have unequal lengths");
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) {
        throw ValidationError(path + ": file holds no data");
    }
    return rows;
}

void write_row(std::ofstream& out, const double* values, Index count)
{
    for (Index i = 0; i < count; ++i) {
        if (i > 0) {
            out << ',';
        }
        out << format_double(values[i]);
    }
    out << '\n';
}

json complex_to_json(Complex z)
{
    return json{{"re", format_double(z.real())}, {"im", format_double(z.imag())}};
}

Complex complex_from_json(const json& j)
{
    const auto field = [&](const char* name) {
        const json& v = j.at(name);
        return v.is_string() ? parse_double(v.get<std::string>()) : v.get<double>();
    };
    return {field("re"), field("im")};
}

double number_from_json(const json& v)
{
    return v.is_string() ? parse_double(v.get<std::string>()) : v.get<double>();
}

json matrix_to_json(const Matrix& m)
{
    json data = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            data.push_back(m(i, j));
        }
    }
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Matrix matrix_from_json(const json& j)
{
    const Index rows = j.at("rows").get<Index>();
    const Index cols = j.at("cols").get<Index>();
    const json& data = j.at("data");
    if (static_cast<Index>(data.size()) != rows * cols) {
        throw ValidationError("matrix payload size does not match its shape");
    }
    Matrix m(rows, cols);
    Index flat = 0;
    for (Index i = 0; i < rows; ++i) {
        for (Index j2 = 0; j2 < cols; ++j2) {
            m(i, j2) = data[static_cast<size_t>(flat++)].get<double>();
        }
    }
    return m;
}

void embed_provenance(json& doc, const std::string& provenance_json)
{
    if (provenance_json.empty()) {
        return;
    }
    json prov = json::parse(provenance_json, nullptr, false);
    if (prov.is_discarded()) {
        throw ValidationError("provenance blob is not valid JSON");
    }
    doc["provenance"] = std::move(prov);
}

void dump_to_file(const json& doc, const std::string& path)
{
    std::ofstream out = open_out(path);
    out << doc.dump(2) << '\n';
}

json load_json(const std::string& path)
{
    std::ifstream in = open_in(path);
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) {
        throw ValidationError(path + " is not valid JSON");
    }
    return doc;
}

ProfileKind kind_from_string(const std::string& name)
{
    if (name == "exponential") return ProfileKind::Exponential;
    if (name == "truncated_linear") return ProfileKind::TruncatedLinear;
    if (name == "truncated_power") return ProfileKind::TruncatedPower;
    throw ValidationError("unknown profile kind '" + name + "'");
}

json provenance_to_json(const KefProvenance& p)
{
    json parents = json::array();
    for (const KefProvenance& parent : p.parents) {
        parents.push_back(provenance_to_json(parent));
    }
    return json{{"op", p.op}, {"detail", p.detail}, {"parents", std::move(parents)}};
}

} // namespace

std::string format_double(double value)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

std::uint64_t content_hash(const std::string& path)
{
    std::ifstream in = open_in(path);
    std::uint64_t hash = 14695981039346656037ull;
    char chunk[4096];
    while (in.read(chunk, sizeof chunk), in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            hash ^= static_cast<unsigned char>(chunk[i]);
            hash *= 1099511628211ull;
        }
    }
    return hash;
}

void save_trajectory_csv(const Trajectory& traj, const std::string& path)
{
    if (traj.samples() != traj.grid.samples()) {
        throw ShapeMismatch("trajectory states and grid disagree");
    }
    std::ofstream out = open_out(path);
    write_row(out, traj.grid.points.data(), traj.grid.samples());
    for (Index i = 0; i < traj.dim(); ++i) {
        const Vector row = traj.states.row(i);
        write_row(out, row.data(), row.size());
    }
}

Trajectory load_trajectory_csv(const std::string& path)
{
    const auto rows = load_csv_rows(path);
    if (rows.size() < 2) {
        throw ValidationError(path + ": expected a time row and at least one state row");
    }
    const Index samples = static_cast<Index>(rows.front().size());
    Vector times(samples);
    for (Index k = 0; k < samples; ++k) {
        times(k) = rows.front()[static_cast<size_t>(k)];
    }
    Matrix states(static_cast<Index>(rows.size()) - 1, samples);
    for (size_t i = 1; i < rows.size(); ++i) {
        for (Index k = 0; k < samples; ++k) {
            states(static_cast<Index>(i) - 1, k) = rows[i][static_cast<size_t>(k)];
        }
    }
    return Trajectory{std::move(states), TimeGrid::from_points(std::move(times))};
}

void save_matrix_csv(const Matrix& m, const std::string& path)
{
    std::ofstream out = open_out(path);
    for (Index i = 0; i < m.rows(); ++i) {
        const Vector row = m.row(i);
        write_row(out, row.data(), row.size());
    }
}

Matrix load_matrix_csv(const std::string& path)
{
    const auto rows = load_csv_rows(path);
    Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (size_t i = 0; i < rows.size(); ++i) {
        for (size_t j = 0; j < rows[i].size(); ++j) {
            m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
        }
    }
    return m;
}

void save_error_csv(const Vector& times, const Vector& per_column, const std::string& path)
{
    if (times.size() != per_column.size()) {
        throw ShapeMismatch("one error value per time sample is required");
    }
    std::ofstream out = open_out(path);
    write_row(out, times.data(), times.size());
    write_row(out, per_column.data(), per_column.size());
}

std::pair<Vector, Vector> load_error_csv(const std::string& path)
{
    const auto rows = load_csv_rows(path);
    if (rows.size() != 2) {
        throw ValidationError(path + ": expected exactly a time row and an error row");
    }
    const Index n = static_cast<Index>(rows.front().size());
    Vector times(n), errors(n);
    for (Index k = 0; k < n; ++k) {
        times(k) = rows[0][static_cast<size_t>(k)];
        errors(k) = rows[1][static_cast<size_t>(k)];
    }
    return {std::move(times), std::move(errors)};
}

void save_dmd_json(const DmdResult& res, const std::string& path,
                   const std::string& provenance_json)
{
    json doc;
    doc["rank"] = res.rank;
    doc["dt"] = format_double(res.dt);
    json eigenvalues = json::array();
    json coefficients = json::array();
    for (Index i = 0; i < res.rank; ++i) {
        eigenvalues.push_back(complex_to_json(res.eigenvalues(i)));
        coefficients.push_back(complex_to_json(res.coefficients(i)));
    }
    doc["eigenvalues"] = std::move(eigenvalues);
    doc["coefficients"] = std::move(coefficients);
    doc["modes"] = json{{"rows", res.modes.rows()},
                        {"cols", res.modes.cols()},
                        {"real", matrix_to_json(res.modes.real())["data"]},
                        {"imag", matrix_to_json(res.modes.imag())["data"]}};
    embed_provenance(doc, provenance_json);
    dump_to_file(doc, path);
}

DmdResult load_dmd_json(const std::string& path)
{
    const json doc = load_json(path);
    DmdResult res;
    res.rank = doc.at("rank").get<Index>();
    res.dt = number_from_json(doc.at("dt"));
    res.eigenvalues.resize(res.rank);
    res.coefficients.resize(res.rank);
    for (Index i = 0; i < res.rank; ++i) {
        res.eigenvalues(i) = complex_from_json(doc.at("eigenvalues")[static_cast<size_t>(i)]);
        res.coefficients(i) =
            complex_from_json(doc.at("coefficients")[static_cast<size_t>(i)]);
    }
    const json& modes = doc.at("modes");
    const Index rows = modes.at("rows").get<Index>();
    const Index cols = modes.at("cols").get<Index>();
    const json& real = modes.at("real");
    const json& imag = modes.at("imag");
    if (static_cast<Index>(real.size()) != rows * cols ||
        static_cast<Index>(imag.size()) != rows * cols) {
        throw ValidationError("mode payload size does not match its shape");
    }
    res.modes.resize(rows, cols);
    Index flat = 0;
    for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) {
            res.modes(i, j) = Complex{real[static_cast<size_t>(flat)].get<double>(),
                                      imag[static_cast<size_t>(flat)].get<double>()};
            ++flat;
        }
    }
    return res;
}

void save_sparse_json(const SparseDecomposition& dec, const std::string& path,
                      const std::string& provenance_json)
{
    json doc;
    doc["family"] = json{{"kind", to_string(dec.kind)},
                         {"power", format_double(dec.power)}};
    doc["selected_atoms"] = dec.selected_atoms;
    json lambdas = json::array();
    for (Index i = 0; i < dec.selected_lambdas.size(); ++i) {
        lambdas.push_back(format_double(dec.selected_lambdas(i)));
    }
    doc["selected_lambdas"] = std::move(lambdas);
    doc["residual"] = dec.residual;
    doc["regularization"] = format_double(dec.regularization);
    doc["modes"] = matrix_to_json(dec.modes);
    doc["refit_dictionary"] = matrix_to_json(dec.refit_dictionary);
    embed_provenance(doc, provenance_json);
    dump_to_file(doc, path);
}

SparseDecomposition load_sparse_json(const std::string& path)
{
    const json doc = load_json(path);
    SparseDecomposition dec;
    dec.kind = kind_from_string(doc.at("family").at("kind").get<std::string>());
    dec.power = number_from_json(doc.at("family").at("power"));
    dec.selected_atoms = doc.at("selected_atoms").get<std::vector<int>>();
    const json& lambdas = doc.at("selected_lambdas");
    dec.selected_lambdas.resize(static_cast<Index>(lambdas.size()));
    for (size_t i = 0; i < lambdas.size(); ++i) {
        dec.selected_lambdas(static_cast<Index>(i)) = number_from_json(lambdas[i]);
    }
    dec.residual = number_from_json(doc.at("residual"));
    dec.regularization = number_from_json(doc.at("regularization"));
    dec.modes = matrix_from_json(doc.at("modes"));
    dec.refit_dictionary = matrix_from_json(doc.at("refit_dictionary"));
    return dec;
}

void save_kef_report_json(const Kef& kef, const ResidualStats& stats,
                          const std::vector<Window>& excluded, const std::string& path,
                          const std::string& provenance_json)
{
    json doc;
    doc["eigenvalue"] = complex_to_json(kef.eigenvalue);
    doc["provenance_tree"] = provenance_to_json(kef.provenance);
    doc["residuals"] = json{{"max", stats.max_residual},
                            {"mean", stats.mean_residual},
                            {"evaluated", stats.evaluated},
                            {"excluded", stats.excluded}};
    json windows = json::array();
    for (const Window& w : excluded) {
        windows.push_back(json{{"lo", w.lo}, {"hi", w.hi}});
    }
    doc["excluded_windows"] = std::move(windows);
    doc["branch_ambiguity"] = kef.branch_ambiguity->load();
    embed_provenance(doc, provenance_json);
    dump_to_file(doc, path);
}

void save_observability_json(const ObservabilityReport& report, const std::string& path,
                             const std::string& provenance_json)
{
    json doc;
    doc["tolerance"] = report.tolerance;
    doc["verdict"] = report.verdict == Observability::Full ? "full" : "deficient";
    json samples = json::array();
    for (size_t i = 0; i < report.ranks.size(); ++i) {
        samples.push_back(json{{"index", report.sample_indices[i]},
                               {"rank", report.ranks[i]}});
    }
    doc["samples"] = std::move(samples);
    embed_provenance(doc, provenance_json);
    dump_to_file(doc, path);
}

void save_closed_loop_json(const ClosedLoopResult& result, const std::string& path,
                           const std::string& provenance_json)
{
    json doc;
    doc["x0"] = std::vector<double>(result.x0.data(), result.x0.data() + result.x0.size());
    doc["target"] =
        std::vector<double>(result.target.data(), result.target.data() + result.target.size());
    doc["final_error"] = result.final_error;
    doc["settling_time"] = result.settling_time;
    embed_provenance(doc, provenance_json);
    dump_to_file(doc, path);
}

} // namespace koop
