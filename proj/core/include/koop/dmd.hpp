#pragma once

#include <complex>
#include <utility>

#include "koop/dynamics.hpp"

namespace koop {

using Complex = std::complex<double>;
using ComplexVector = Eigen::VectorXcd;
using ComplexMatrix = Eigen::MatrixXcd;

/// How many singular directions the reduced model keeps.
struct RankRule {
    enum class Kind { Fixed, Energy };

    Kind kind = Kind::Energy;
    Index rank = 0;
    double energy = 0.9999;

    static RankRule fixed(Index r) { return {Kind::Fixed, r, 0.0}; }
    static RankRule energy_fraction(double fraction)
    {
        return {Kind::Energy, 0, fraction};
    }
};

struct TruncatedSvd {
    Matrix u;                // rows x r
    Vector singular_values;  // r
    Matrix v;                // cols x r
};

/// Best-fit linear model of one-step evolution in the reduced basis.
struct DmdResult {
    ComplexMatrix modes;        // dim x rank
    ComplexVector eigenvalues;  // step-map eigenvalues, one per mode
    ComplexVector coefficients; // initial-condition weights, one per mode
    Index rank = 0;
    double dt = 0.0;
};

struct ErrorReport {
    double relative_frobenius = 0.0;
    Vector per_column;  // l2 error per snapshot
};

/// Splits snapshots into (X0, X1) = (columns 0..M-1, columns 1..M).
/// Throws TooFewSnapshots unless there are at least two columns.
std::pair<Matrix, Matrix> build_data_matrices(const Trajectory& traj);

/// Leading r singular triplets of x0 under the rank rule. A fixed rank
/// above the numerical rank throws RankTooLarge.
TruncatedSvd truncated_svd(const Matrix& x0, const RankRule& rule);

/// Minimizer F of ||F c0 - c1||_F via a rank-revealing least-squares solve.
/// Throws SingularData when c0 has numerically dependent rows.
Matrix fit_linear_map(const Matrix& c0, const Matrix& c1);

/// Full decomposition: reduced basis, one-step map, its eigensystem, and
/// the weights reproducing the first snapshot. Throws DefectiveMap when the
/// eigenvector matrix is too ill-conditioned to invert.
DmdResult dmd(const Trajectory& traj, const RankRule& rule);

/// Snapshot k as sum_i coeff_i * eigenvalue_i^k * mode_i.
ComplexVector dmd_reconstruct_complex(const DmdResult& res, Index k);

/// Real part of the reconstruction; imaginary residue stays at rounding
/// level for real snapshot data (asserted by the test suite).
Vector dmd_reconstruct(const DmdResult& res, Index k);

/// Reconstructions for k = 0..count-1, one column per snapshot.
Matrix dmd_reconstruct_all(const DmdResult& res, Index count);

/// Relative Frobenius mismatch plus per-snapshot l2 errors.
/// Throws ShapeMismatch unless both matrices agree in shape.
ErrorReport reconstruction_error(const Matrix& reference, const Matrix& reconstruction);

} // namespace koop
