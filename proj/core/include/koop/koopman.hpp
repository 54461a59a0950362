#pragma once

#include <atomic>
#include <complex>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "koop/dynamics.hpp"
#include "koop/dmd.hpp"
#include "koop/sparse.hpp"

namespace koop {

/// How an eigenfunction was built, kept as a tree for reporting.
struct KefProvenance {
    std::string op;     // "mapping", "analytic", "linear_profile",
                        // "scale", "power", "product", "combine"
    std::string detail;
    std::vector<KefProvenance> parents;
};

/// Observable phi with d/dt phi(x(t)) = eigenvalue * phi(x(t)) along
/// trajectories of the system it was built for.
struct Kef {
    Complex eigenvalue{0.0, 0.0};
    std::function<Complex(const Vector&)> evaluate;
    KefProvenance provenance;

    /// Set when a principal-branch power was taken of a value on the
    /// negative real axis, where the branch choice is arbitrary.
    std::shared_ptr<std::atomic<bool>> branch_ambiguity =
        std::make_shared<std::atomic<bool>>(false);
};

/// Wraps a user-supplied closed-form eigenfunction.
Kef kef_analytic(std::string label, Complex eigenvalue,
                 std::function<Complex(const Vector&)> evaluate);

/// Eigenfunction induced by inverting one decay profile:
///   phi(x) = exp(alpha * t(proj) + beta),  proj = <mode, x> / ||mode||^2
/// where t(.) is the profile's inverse. Its eigenvalue is alpha.
/// Evaluation throws OutOfRange when proj leaves (0, 1].
Kef kef_from_mapping(const ProfileFamily& family, double lambda, const Vector& mode,
                     double alpha, double beta);

/// Eigenfunction for states sliding along `mode` at constant rate:
///   phi(x) = exp(<mode, x> / (||mode||^2 * rate)),  eigenvalue 1.
Kef kef_from_linear_profile(const Vector& mode, double rate);

/// a * phi. Keeps the eigenvalue. Throws ZeroScale when a == 0.
Kef kef_scale(const Kef& phi, double a);

/// phi^alpha (principal branch). Eigenvalue alpha * lambda.
Kef kef_power(const Kef& phi, Complex alpha);

/// phi1^n * phi2^m. Eigenvalue n * lambda1 + m * lambda2.
Kef kef_product(const Kef& phi1, const Kef& phi2, double n, double m);

/// phi1^(target/lambda1) + phi2^(target/lambda2). Eigenvalue target.
/// Throws ZeroEigenvalueParent when either parent eigenvalue is zero.
Kef kef_combine(const Kef& phi1, const Kef& phi2, Complex target);

/// A stack of eigenfunctions treated as one vector-valued observable.
struct KefVector {
    std::vector<Kef> entries;

    [[nodiscard]] Index size() const { return static_cast<Index>(entries.size()); }
    [[nodiscard]] ComplexVector eigenvalues() const;
    [[nodiscard]] ComplexVector operator()(const Vector& x) const;
};

struct Window {
    double lo = 0.0;
    double hi = 0.0;
    [[nodiscard]] bool contains(double t) const { return t >= lo && t <= hi; }
};

/// Windows around the detected equilibrium entry and around each supplied
/// vanishing time, each widened by `width_fraction` of the grid span on
/// both sides. Used to keep finite-difference statistics away from kinks.
std::vector<Window> extinction_windows(const Trajectory& traj, double equilibrium_tol,
                                       const std::vector<double>& vanishing_times,
                                       double width_fraction = 0.02);

struct ResidualStats {
    double max_residual = 0.0;
    double mean_residual = 0.0;
    Index evaluated = 0; // interior snapshots that entered the statistics
    Index excluded = 0;  // interior snapshots inside an excluded window
};

/// Central-difference check of d/dt phi = eigenvalue * phi along the
/// trajectory. Each interior snapshot contributes
///   |fd - lambda*phi| / max(|lambda*phi|, 1e-12).
ResidualStats eigen_residual(const Kef& phi, const Trajectory& traj,
                             const std::vector<Window>& exclude = {});

/// Central-difference gradients, one row per eigenfunction. Step defaults
/// to 1e-5 * (1 + ||x||) when h == 0.
ComplexMatrix jacobian(const KefVector& kefs, const Vector& x, double h = 0.0);

enum class Observability { Full, Deficient };

struct ObservabilityReport {
    std::vector<Index> sample_indices;
    std::vector<Index> ranks;      // singular values above tol * largest
    double tolerance = 0.0;
    Observability verdict = Observability::Deficient;
};

/// Numerical Jacobian rank at up to max_samples snapshots spread evenly
/// along the trajectory. Verdict is Full when the rank equals the state
/// dimension at 95% or more of the samples.
ObservabilityReport observability_rank(const KefVector& kefs, const Trajectory& traj,
                                       double h = 0.0, double tol = 1e-8,
                                       Index max_samples = 50);

/// Velocity estimate solving jacobian * v = diag(eigenvalues) * phi(x) in
/// the least-squares sense. Throws RankDeficientJacobian when the stack
/// cannot see all state directions at x.
Vector reconstruct_dynamics(const KefVector& kefs, const Vector& x, double h = 0.0);

/// Largest relative mismatch of modes * J(phi(x_k)) * v_k against v_k over
/// interior snapshots, where v_k is the central-difference velocity. Zero
/// mismatch means the mode matrix inverts the eigenfunction Jacobian on
/// the trajectory.
double koopman_mode_check(const Matrix& modes, const KefVector& kefs,
                          const Trajectory& traj, double h = 0.0);

/// Least-squares profile rows D with data ≈ modes * D. Throws
/// IllConditionedModes when the mode Gram matrix is too ill-conditioned.
Matrix recover_profiles(const Matrix& modes, const Matrix& data);

struct TimeMappingReport {
    Matrix times;  // selected atoms x samples; NaN where inversion failed
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> valid;
    Vector disagreement; // per snapshot, max - min over valid atoms
                         // (NaN with fewer than two valid atoms)
};

/// Recovers the time at every snapshot from each selected atom separately:
/// profiles are re-estimated from the modes, then inverted per atom.
/// Out-of-range profile values are flagged instead of thrown.
TimeMappingReport time_mapping_from_modes(const SparseDecomposition& dec,
                                          const Matrix& data);

struct SeriesFit {
    double slope = 0.0;
    double intercept = 0.0;
    double rms = 0.0;           // fit residual inside the window
    double fit_end = 0.0;       // window is [t_0, fit_end]
    double max_post_deviation = 0.0; // departure from the line after fit_end
};

struct EigenfunctionalSeries {
    Matrix series; // selected atoms x samples
    std::vector<SeriesFit> fits;
};

/// Projects each snapshot onto the modes through the Gram matrix and
/// subtracts one. For data built on the family's profiles the i-th series
/// equals a_i(t) - 1, so it decays linearly with slope -lambda_i until the
/// profile vanishes; the linear fit runs on [t_0, 1/lambda_i - fit_margin]
/// (the whole grid for families without a vanishing time).
EigenfunctionalSeries eigenfunctional_series(const SparseDecomposition& dec,
                                             const Trajectory& traj,
                                             double fit_margin = 0.5);

/// Partial Mercator sum approximating the profile multiplier from an
/// eigenfunction value: 1 - lambda * sum_{n=1..terms} (-1)^{n+1} (phi-1)^n / n.
/// Throws RadiusExceeded when |phi - 1| >= 1.
double kmd_truncated_expansion(double phi_value, double lambda, int terms);

} // namespace koop
