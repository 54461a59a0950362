#include "koop/dmd.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <limits>

namespace koop {

namespace {

double condition_number(const ComplexMatrix& m)
{
    Eigen::JacobiSVD<ComplexMatrix> svd(m);
    const auto& sv = svd.singularValues();
    if (sv(sv.size() - 1) <= 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return sv(0) / sv(sv.size() - 1);
}

} // namespace

std::pair<Matrix, Matrix> build_data_matrices(const Trajectory& traj)
{
    if (traj.samples() < 2) {
        throw TooFewSnapshots("need at least two snapshots to form shifted pairs");
    }
    const Index m = traj.samples() - 1;
    return {traj.states.leftCols(m), traj.states.rightCols(m)};
}

TruncatedSvd truncated_svd(const Matrix& x0, const RankRule& rule)
{
    Eigen::BDCSVD<Matrix> svd(x0, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();

    const double eps = std::numeric_limits<double>::epsilon();
    const double rank_tol =
        sv.size() > 0 ? sv(0) * static_cast<double>(std::max(x0.rows(), x0.cols())) * eps
                      : 0.0;
    Index numerical_rank = 0;
    for (Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > rank_tol) {
            ++numerical_rank;
        }
    }

    Index r = 0;
    if (rule.kind == RankRule::Kind::Fixed) {
        if (rule.rank < 1 || rule.rank > numerical_rank) {
            throw RankTooLarge("requested rank " + std::to_string(rule.rank) +
                               " exceeds the numerical rank " +
                               std::to_string(numerical_rank));
        }
        r = rule.rank;
    } else {
        if (!(rule.energy > 0.0) || rule.energy > 1.0) {
            throw ValidationError("energy fraction must lie in (0, 1]");
        }
        const double total = sv.squaredNorm();
        double partial = 0.0;
        r = numerical_rank;
        for (Index i = 0; i < numerical_rank; ++i) {
            partial += sv(i) * sv(i);
            if (partial >= rule.energy * total) {
                r = i + 1;
                break;
            }
        }
        if (r < 1) {
            throw SingularData("data matrix has no energy to keep");
        }
    }

    return TruncatedSvd{svd.matrixU().leftCols(r), sv.head(r), svd.matrixV().leftCols(r)};
}

Matrix fit_linear_map(const Matrix& c0, const Matrix& c1)
{
    if (c0.rows() != c1.rows() || c0.cols() != c1.cols()) {
        throw ShapeMismatch("reduced snapshot blocks must have equal shape");
    }
    Eigen::BDCSVD<Matrix> svd(c0.transpose(), Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();
    if (sv(sv.size() - 1) <= 1e-12 * sv(0)) {
        throw SingularData("reduced snapshots do not span the retained directions");
    }
    // F C0 = C1 transposed into C0^T F^T = C1^T and solved column by column.
    return svd.solve(c1.transpose()).transpose();
}

DmdResult dmd(const Trajectory& traj, const RankRule& rule)
{
    auto [x0, x1] = build_data_matrices(traj);
    const TruncatedSvd svd = truncated_svd(x0, rule);

    const Matrix c0 = svd.u.transpose() * x0;
    const Matrix c1 = svd.u.transpose() * x1;
    const Matrix f = fit_linear_map(c0, c1);

    Eigen::EigenSolver<Matrix> eig(f);
    if (eig.info() != Eigen::Success) {
        throw DefectiveMap("eigendecomposition of the reduced map failed");
    }
    const ComplexMatrix w = eig.eigenvectors();
    if (condition_number(w) > 1e12) {
        throw DefectiveMap("reduced map has a near-defective eigenbasis");
    }

    DmdResult res;
    res.rank = f.rows();
    res.dt = traj.grid.step();
    res.eigenvalues = eig.eigenvalues();
    res.modes = svd.u * w;
    res.coefficients =
        w.colPivHouseholderQr().solve((svd.u.transpose() * traj.states.col(0)).cast<Complex>());
    return res;
}

ComplexVector dmd_reconstruct_complex(const DmdResult& res, Index k)
{
    if (k < 0) {
        throw ValidationError("snapshot index must be non-negative");
    }
    ComplexVector weights(res.rank);
    for (Index i = 0; i < res.rank; ++i) {
        weights(i) = std::pow(res.eigenvalues(i), static_cast<double>(k)) *
                     res.coefficients(i);
    }
    return res.modes * weights;
}

Vector dmd_reconstruct(const DmdResult& res, Index k)
{
    return dmd_reconstruct_complex(res, k).real();
}

Matrix dmd_reconstruct_all(const DmdResult& res, Index count)
{
    Matrix out(res.modes.rows(), count);
    ComplexVector weights = res.coefficients;
    for (Index k = 0; k < count; ++k) {
        out.col(k) = (res.modes * weights).real();
        weights = weights.cwiseProduct(res.eigenvalues);
    }
    return out;
}

ErrorReport reconstruction_error(const Matrix& reference, const Matrix& reconstruction)
{
    if (reference.rows() != reconstruction.rows() ||
        reference.cols() != reconstruction.cols()) {
        throw ShapeMismatch("reference and reconstruction shapes differ");
    }
    ErrorReport report;
    report.per_column = (reference - reconstruction).colwise().norm();
    const double ref_norm = reference.norm();
    report.relative_frobenius =
        (reference - reconstruction).norm() / (ref_norm > 0.0 ? ref_norm : 1.0);
    return report;
}

} // namespace koop
