#include "koop/sparse.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>
#include <numeric>

namespace koop {

namespace {

Matrix normalized_atoms(const ProfileDictionary& dict)
{
    Matrix an = dict.atoms;
    for (Index i = 0; i < an.rows(); ++i) {
        an.row(i) /= dict.row_norms(i);
    }
    return an;
}

double soft_threshold(double z, double reg)
{
    if (z > reg) return z - reg;
    if (z < -reg) return z + reg;
    return 0.0;
}

/// One coordinate-descent pass over the listed atoms. V holds coefficients
/// for unit-norm atoms, R the current residual data - V * an.
void cd_pass(Matrix& v, Matrix& r, const Matrix& an, double reg,
             const std::vector<Index>& atoms)
{
    for (Index j : atoms) {
        Vector z = v.col(j) + r * an.row(j).transpose();
        bool changed = false;
        for (Index i = 0; i < z.size(); ++i) {
            const double next = soft_threshold(z(i), reg);
            if (next != v(i, j)) {
                changed = true;
            }
            z(i) = next;
        }
        if (changed) {
            r.noalias() += (v.col(j) - z) * an.row(j);
            v.col(j) = z;
        }
    }
}

double kkt_violation(const Matrix& v, const Matrix& r, const Matrix& an, double reg,
                     const std::vector<Index>& atoms)
{
    double worst = 0.0;
    for (Index j : atoms) {
        const Vector c = r * an.row(j).transpose();
        for (Index i = 0; i < c.size(); ++i) {
            const double viol = v(i, j) != 0.0
                                    ? std::abs(c(i) - reg * (v(i, j) > 0.0 ? 1.0 : -1.0))
                                    : std::max(0.0, std::abs(c(i)) - reg);
            worst = std::max(worst, viol);
        }
    }
    return worst;
}

std::vector<Index> all_atoms(Index count)
{
    std::vector<Index> idx(static_cast<size_t>(count));
    std::iota(idx.begin(), idx.end(), Index{0});
    return idx;
}

std::vector<Index> active_atoms(const Matrix& v)
{
    std::vector<Index> idx;
    for (Index j = 0; j < v.cols(); ++j) {
        if ((v.col(j).array() != 0.0).any()) {
            idx.push_back(j);
        }
    }
    return idx;
}

struct LassoCore {
    Matrix coeffs;
    double kkt = 0.0;
    bool converged = false;
    Index passes = 0;
};

LassoCore lasso_core(const Matrix& data, const ProfileDictionary& dict, double reg,
                     const LassoOptions& opts)
{
    if (reg < 0.0) {
        throw ValidationError("regularization must be non-negative");
    }
    if (data.cols() != dict.grid.samples()) {
        throw ShapeMismatch("data columns must match the dictionary grid");
    }
    const Index count = dict.size();
    const Matrix an = normalized_atoms(dict);
    const Index budget = opts.max_sweeps > 0 ? opts.max_sweeps : 10 * count;

    LassoCore out;
    if (opts.warm_start.size() > 0) {
        if (opts.warm_start.rows() != data.rows() || opts.warm_start.cols() != count) {
            throw ShapeMismatch("warm start shape must be data rows x atoms");
        }
        out.coeffs = opts.warm_start;
    } else {
        out.coeffs = Matrix::Zero(data.rows(), count);
    }

    Matrix residual = data - out.coeffs * an;
    const std::vector<Index> everything = all_atoms(count);

    // Polish passes over a frozen support are capped: a near-collinear
    // support makes the frozen subproblem arbitrarily slow, and only the
    // interleaved full sweeps can rearrange the support to escape it.
    constexpr Index polish_cap = 50;

    out.kkt = kkt_violation(out.coeffs, residual, an, reg, everything);
    while (out.kkt > opts.tol && out.passes < budget) {
        cd_pass(out.coeffs, residual, an, reg, everything);
        ++out.passes;
        const std::vector<Index> active = active_atoms(out.coeffs);
        for (Index polish = 0;
             polish < polish_cap && !active.empty() && out.passes < budget; ++polish) {
            cd_pass(out.coeffs, residual, an, reg, active);
            ++out.passes;
            if (kkt_violation(out.coeffs, residual, an, reg, active) <= opts.tol) {
                break;
            }
        }
        out.kkt = kkt_violation(out.coeffs, residual, an, reg, everything);
    }
    out.converged = out.kkt <= opts.tol;
    return out;
}

/// Inverse of a symmetric positive semi-definite Gram matrix through its
/// SVD, zeroing directions below cutoff * sigma_max.
Matrix gram_pseudo_inverse(const Matrix& gram, double cutoff_ratio)
{
    Eigen::JacobiSVD<Matrix> svd(gram, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();
    Vector inv = Vector::Zero(sv.size());
    const double cutoff = cutoff_ratio * (sv.size() > 0 ? sv(0) : 0.0);
    for (Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > cutoff) {
            inv(i) = 1.0 / sv(i);
        }
    }
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Matrix rows_at(const Matrix& m, const std::vector<int>& rows)
{
    Matrix out(static_cast<Index>(rows.size()), m.cols());
    for (size_t i = 0; i < rows.size(); ++i) {
        out.row(static_cast<Index>(i)) = m.row(rows[i]);
    }
    return out;
}

} // namespace

Matrix lasso(const Matrix& data, const ProfileDictionary& dict, double reg,
             const LassoOptions& opts)
{
    LassoCore core = lasso_core(data, dict, reg, opts);
    if (!core.converged) {
        char detail[96];
        std::snprintf(detail, sizeof detail,
                      "lasso KKT violation %.3g above tolerance after %lld sweeps",
                      core.kkt, static_cast<long long>(core.passes));
        throw NoConvergence(detail);
    }
    return core.coeffs;
}

double lasso_reg_max(const Matrix& data, const ProfileDictionary& dict)
{
    if (data.cols() != dict.grid.samples()) {
        throw ShapeMismatch("data columns must match the dictionary grid");
    }
    return (data * normalized_atoms(dict).transpose()).cwiseAbs().maxCoeff();
}

SparseDecomposition prune_and_refit(const Matrix& data, const ProfileDictionary& dict,
                                    const Matrix& coeffs, double reg)
{
    if (coeffs.cols() != dict.size() || data.cols() != dict.grid.samples()) {
        throw ShapeMismatch("coefficients must be data rows x atoms");
    }

    std::vector<int> order;
    for (Index j = 0; j < coeffs.cols(); ++j) {
        if (coeffs.col(j).norm() > 0.0) {
            order.push_back(static_cast<int>(j));
        }
    }
    if (order.empty()) {
        throw EmptySupport("no nonzero coefficient columns to refit");
    }
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return coeffs.col(a).norm() < coeffs.col(b).norm();
    });

    struct Candidate {
        std::vector<int> set;
        double err2;
    };
    std::vector<Candidate> recorded;
    std::vector<int> current = order;
    while (!current.empty()) {
        const Matrix dh = rows_at(dict.atoms, current);
        const Matrix gram = dh * dh.transpose();
        Eigen::JacobiSVD<Matrix> svd(gram);
        const Vector& sv = svd.singularValues();
        const double smin = sv(sv.size() - 1);
        if (!(smin > 0.0) || sv(0) / smin > 1e12) {
            std::clog << "prune_and_refit: skipping ill-conditioned candidate of size "
                      << current.size() << "\n";
            current.erase(current.begin());
            continue;
        }
        const Matrix vh = data * dh.transpose() * gram_pseudo_inverse(gram, 1e-12);
        recorded.push_back({current, (data - vh * dh).squaredNorm()});
        current.erase(current.begin());
    }
    if (recorded.empty()) {
        throw IllConditionedRefit("every candidate set was too ill-conditioned to refit");
    }

    // The plain minimum cannot distinguish candidate sets whose errors agree
    // to rounding, so sets within 1e-12 * ||data||_F^2 of the best tie and
    // the smallest one wins.
    double best = std::numeric_limits<double>::infinity();
    for (const Candidate& c : recorded) {
        best = std::min(best, c.err2);
    }
    const double window = best + 1e-12 * data.squaredNorm();
    const Candidate* chosen = nullptr;
    for (const Candidate& c : recorded) {
        if (c.err2 <= window) {
            chosen = &c; // sizes shrink along the chain, so the last hit is smallest
        }
    }

    SparseDecomposition dec;
    dec.kind = dict.family.kind;
    dec.power = dict.family.power;
    dec.selected_atoms = chosen->set;
    dec.selected_lambdas.resize(static_cast<Index>(chosen->set.size()));
    for (size_t i = 0; i < chosen->set.size(); ++i) {
        dec.selected_lambdas(static_cast<Index>(i)) =
            dict.family.lambdas[static_cast<size_t>(chosen->set[i])];
    }
    dec.refit_dictionary = rows_at(dict.atoms, chosen->set);
    const Matrix gram = dec.refit_dictionary * dec.refit_dictionary.transpose();
    dec.modes = data * dec.refit_dictionary.transpose() * gram_pseudo_inverse(gram, 1e-12);
    const double data_norm = data.norm();
    dec.residual = (data - dec.modes * dec.refit_dictionary).norm() /
                   (data_norm > 0.0 ? data_norm : 1.0);
    dec.regularization = reg;
    return dec;
}

Matrix sparse_reconstruct(const SparseDecomposition& dec)
{
    if (dec.modes.cols() != dec.refit_dictionary.rows()) {
        throw ShapeMismatch("modes and refit dictionary disagree on the atom count");
    }
    return dec.modes * dec.refit_dictionary;
}

RegSweep choose_regularization(const Matrix& data, const ProfileDictionary& dict,
                               int points, double decades, double tol)
{
    if (points < 2 || !(decades > 0.0)) {
        throw ValidationError("sweep needs at least two points over a positive range");
    }
    const double reg_top = lasso_reg_max(data, dict);
    const double data_norm = data.norm();

    RegSweep sweep;
    struct Eligible {
        double residual;
        Index support;
        double reg;
        SparseDecomposition dec;
    };
    std::vector<Eligible> eligible;

    LassoOptions opts;
    opts.tol = tol;
    // Passes to converge do not shrink with the atom count, so small
    // dictionaries get a flat floor instead of the proportional budget.
    opts.max_sweeps = std::max<Index>(50 * dict.size(), 5000);
    for (int p = 0; p < points; ++p) {
        const double reg =
            reg_top * std::pow(10.0, -decades * static_cast<double>(p) / (points - 1));
        LassoCore core = lasso_core(data, dict, reg, opts);
        opts.warm_start = core.coeffs;

        RegSweepPoint point;
        point.reg = reg;
        point.converged = core.converged;
        point.lasso_support = static_cast<Index>(active_atoms(core.coeffs).size());
        point.lasso_residual = (data - core.coeffs * normalized_atoms(dict)).norm() /
                               (data_norm > 0.0 ? data_norm : 1.0);
        point.refit_support = 0;
        point.refit_residual = std::numeric_limits<double>::quiet_NaN();
        if (core.converged && point.lasso_support > 0) {
            try {
                SparseDecomposition dec = prune_and_refit(data, dict, core.coeffs, reg);
                point.refit_support = static_cast<Index>(dec.selected_atoms.size());
                point.refit_residual = dec.residual;
                eligible.push_back({dec.residual, point.refit_support, reg, std::move(dec)});
            } catch (const NumericalError&) {
                // recorded as a non-eligible sweep point
            }
        }
        sweep.points.push_back(point);
    }

    if (eligible.empty()) {
        throw NoConvergence("no sweep point produced a usable decomposition");
    }
    double best = std::numeric_limits<double>::infinity();
    for (const Eligible& e : eligible) {
        best = std::min(best, e.residual);
    }
    const double window = best + std::max(1e-6 * best, 1e-15);
    const Eligible* chosen = nullptr;
    for (const Eligible& e : eligible) {
        if (e.residual > window) {
            continue;
        }
        if (chosen == nullptr || e.support < chosen->support ||
            (e.support == chosen->support && e.reg > chosen->reg)) {
            chosen = &e;
        }
    }
    sweep.chosen = chosen->reg;
    sweep.decomposition = chosen->dec;
    return sweep;
}

} // namespace koop
