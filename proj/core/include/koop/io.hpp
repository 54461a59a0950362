#pragma once

#include <cstdint>
#include <string>

#include "koop/control.hpp"
#include "koop/dmd.hpp"
#include "koop/dynamics.hpp"
#include "koop/koopman.hpp"
#include "koop/sparse.hpp"

namespace koop {

/// Shortest decimal form that parses back to exactly the same double
/// (17 significant digits).
std::string format_double(double value);

/// FNV-1a over the file's bytes, for provenance records.
std::uint64_t content_hash(const std::string& path);

/// Trajectory CSV layout: first row is the time grid, each following row
/// one state component. Values round-trip exactly.
void save_trajectory_csv(const Trajectory& traj, const std::string& path);
Trajectory load_trajectory_csv(const std::string& path);

/// Plain numeric CSV, one matrix row per line.
void save_matrix_csv(const Matrix& m, const std::string& path);
Matrix load_matrix_csv(const std::string& path);

/// Time-indexed error curve: first row times, second row per-snapshot l2
/// errors (the comparison format consumed by error-ratio reports).
void save_error_csv(const Vector& times, const Vector& per_column, const std::string& path);
std::pair<Vector, Vector> load_error_csv(const std::string& path);

/// JSON round-trip for decomposition results. Eigenvalues and coefficients
/// are stored as decimal strings so reruns are byte-identical; the optional
/// provenance blob (itself JSON) is embedded verbatim under "provenance".
void save_dmd_json(const DmdResult& res, const std::string& path,
                   const std::string& provenance_json = "");
DmdResult load_dmd_json(const std::string& path);

void save_sparse_json(const SparseDecomposition& dec, const std::string& path,
                      const std::string& provenance_json = "");
SparseDecomposition load_sparse_json(const std::string& path);

/// Report writers for the command line tool.
void save_kef_report_json(const Kef& kef, const ResidualStats& stats,
                          const std::vector<Window>& excluded, const std::string& path,
                          const std::string& provenance_json = "");
void save_observability_json(const ObservabilityReport& report, const std::string& path,
                             const std::string& provenance_json = "");
void save_closed_loop_json(const ClosedLoopResult& result, const std::string& path,
                           const std::string& provenance_json = "");

} // namespace koop
