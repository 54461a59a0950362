#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>

#include "koop/errors.hpp"

namespace koop {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Sample times t_0 < t_1 < ... < t_M.
struct TimeGrid {
    Vector points;

    static TimeGrid uniform(double start, double end, Index samples);
    static TimeGrid from_points(Vector pts);

    [[nodiscard]] Index samples() const { return points.size(); }
    [[nodiscard]] double start() const { return points(0); }
    [[nodiscard]] double end() const { return points(points.size() - 1); }
    [[nodiscard]] bool is_uniform(double rel_tol = 1e-9) const;

    /// Spacing of a uniform grid. Throws DomainError on non-uniform grids.
    [[nodiscard]] double step() const;
};

/// Autonomous first-order system x' = rhs(x), optionally with a known
/// closed-form solution t -> x(t) used as ground truth in experiments.
struct SystemSpec {
    Index dim = 0;
    std::function<Vector(const Vector&)> rhs;
    std::function<Vector(double)> closed_form;
    std::string label;
};

/// States sampled on a time grid, one column per sample.
struct Trajectory {
    Matrix states;
    TimeGrid grid;

    [[nodiscard]] Index dim() const { return states.rows(); }
    [[nodiscard]] Index samples() const { return states.cols(); }
};

/// Classical fourth-order Runge-Kutta with the grid's fixed step.
/// Only uniform grids are accepted. Throws NonFiniteState as soon as a
/// stage or state stops being finite.
Trajectory integrate(const SystemSpec& sys, const Vector& x0, const TimeGrid& grid);

/// Scalar system x' = -2 sqrt(max(x, 0)), solution (1 - t)^2 from x(0) = 1,
/// frozen at 0 once it reaches the origin at t = 1.
SystemSpec finite_time_system();

/// Planar system x1' = x1, x2' = x2 - x1^2 with closed form
/// [e^t, 2 e^t - e^{2t}] from x(0) = [1, 1].
SystemSpec nonlinear_2d_system();

/// States x(t_k) = direction * (1 - lambda * t_k). The grid must stay
/// inside [0, 1/lambda); beyond that the profile changes sign instead of
/// vanishing, which this factory refuses with DomainError.
Trajectory zero_homogeneous_trajectory(const Vector& direction, double lambda,
                                       const TimeGrid& grid);

/// Two spatial modes decaying on truncated-linear profiles:
/// x(t_k) = mode1 * max(0, 1 - lambda1 t_k) + mode2 * max(0, 1 - lambda2 t_k).
/// The grid may run past either vanishing time.
Trajectory synthetic_pde_trajectory(const Vector& mode1, double lambda1,
                                    const Vector& mode2, double lambda2,
                                    const TimeGrid& grid);

/// Smooth compactly supported bump exp(1 - 1/(1 - s^2)) on |s| < 1 with
/// s = (x - center)/width, sampled on `points` equispaced nodes in [0, 1].
Vector bump_profile(Index points, double center, double width, double amplitude = 1.0);

/// First index k such that every finite-difference velocity
/// ||x_{j+1} - x_j|| / dt with j >= k stays below tol. Returns nullopt when
/// the trajectory is still moving at the end.
std::optional<Index> detect_equilibrium(const Trajectory& traj, double tol);

} // namespace koop
