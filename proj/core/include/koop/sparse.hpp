#pragma once

#include <vector>

#include "koop/profiles.hpp"

namespace koop {

struct LassoOptions {
    double tol = 1e-8;   // largest allowed KKT violation at the solution
    Index max_sweeps = 0; // 0 means 10 * (number of atoms)
    Matrix warm_start;   // optional initial coefficients (empty = zeros)
};

/// Coordinate-descent minimizer of
///   0.5 ||X - V A||_F^2 + reg * sum_ij |V_ij|
/// where A holds the dictionary atoms scaled to unit norm. The returned
/// coefficients refer to those unit-norm atoms. Throws NoConvergence when
/// the KKT violation still exceeds tol after the sweep budget.
Matrix lasso(const Matrix& data, const ProfileDictionary& dict, double reg,
             const LassoOptions& opts = {});

/// Smallest reg for which the all-zero matrix is optimal.
double lasso_reg_max(const Matrix& data, const ProfileDictionary& dict);

/// Subset of the dictionary with de-biased modes fitted by least squares.
struct SparseDecomposition {
    ProfileKind kind = ProfileKind::TruncatedLinear;
    double power = 2.0;
    std::vector<int> selected_atoms;  // indices into the parent dictionary,
                                      // in ascending order of lasso column norm
    Vector selected_lambdas;
    Matrix modes;             // dim x s, original (unnormalized) atom scale
    Matrix refit_dictionary;  // s x samples, rows of the parent dictionary
    double residual = 0.0;    // ||X - modes * refit_dictionary||_F / ||X||_F
    double regularization = 0.0;
};

/// Backward-elimination refinement of a lasso support:
/// sort the nonzero coefficient columns ascending by norm, then repeatedly
/// refit on the remaining atoms, record the squared error, and drop the
/// smallest-norm atom until none are left. The smallest recorded set whose
/// error ties the minimum (within 1e-12 * ||X||_F^2) wins and is refit once
/// more. Candidate sets whose refit Gram matrix has condition number above
/// 1e12 are skipped. Throws EmptySupport when coeffs is identically zero and
/// IllConditionedRefit when every candidate set was skipped.
SparseDecomposition prune_and_refit(const Matrix& data, const ProfileDictionary& dict,
                                    const Matrix& coeffs, double reg = 0.0);

/// modes * refit_dictionary.
Matrix sparse_reconstruct(const SparseDecomposition& dec);

struct RegSweepPoint {
    double reg = 0.0;
    bool converged = false;
    Index lasso_support = 0;
    double lasso_residual = 0.0; // relative Frobenius, biased coefficients
    Index refit_support = 0;
    double refit_residual = 0.0; // relative Frobenius after prune_and_refit
};

struct RegSweep {
    std::vector<RegSweepPoint> points;
    double chosen = 0.0;
    SparseDecomposition decomposition; // prune_and_refit result at chosen
};

/// Warm-started log sweep from lasso_reg_max down the given number of
/// decades. Each converged point is pruned and refit; the chosen reg
/// minimizes the refit residual, preferring smaller supports and then
/// larger regs among points within 1e-6 relative of that minimum. The
/// winning decomposition is returned with the sweep, since a cold solve
/// at the chosen reg need not reproduce the warm-started coefficients.
/// Points that fail to converge or prune are recorded but not eligible.
/// Throws NoConvergence when no point is eligible.
RegSweep choose_regularization(const Matrix& data, const ProfileDictionary& dict,
                               int points = 10, double decades = 4.0,
                               double tol = 1e-8);

} // namespace koop
