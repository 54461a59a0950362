#include "koop/dynamics.hpp"

#include <cmath>

namespace koop {

TimeGrid TimeGrid::uniform(double start, double end, Index samples)
{
    if (samples < 2) {
        throw DomainError("time grid needs at least two samples");
    }
    if (!(end > start)) {
        throw DomainError("time grid must run forward");
    }
    Vector pts(samples);
    const double dt = (end - start) / static_cast<double>(samples - 1);
    for (Index k = 0; k < samples; ++k) {
        pts(k) = start + dt * static_cast<double>(k);
    }
    pts(samples - 1) = end;
    return TimeGrid{std::move(pts)};
}

TimeGrid TimeGrid::from_points(Vector pts)
{
    if (pts.size() < 2) {
        throw DomainError("time grid needs at least two samples");
    }
    for (Index k = 0; k + 1 < pts.size(); ++k) {
        if (!(pts(k + 1) > pts(k))) {
            throw DomainError("time grid must be strictly increasing");
        }
    }
    return TimeGrid{std::move(pts)};
}

bool TimeGrid::is_uniform(double rel_tol) const
{
    const double dt = (end() - start()) / static_cast<double>(samples() - 1);
    for (Index k = 0; k + 1 < samples(); ++k) {
        if (std::abs(points(k + 1) - points(k) - dt) > rel_tol * std::abs(dt)) {
            return false;
        }
    }
    return true;
}

double TimeGrid::step() const
{
    if (!is_uniform()) {
        throw DomainError("grid spacing is not uniform");
    }
    return (end() - start()) / static_cast<double>(samples() - 1);
}

Trajectory integrate(const SystemSpec& sys, const Vector& x0, const TimeGrid& grid)
{
    if (!sys.rhs) {
        throw ValidationError("system has no right-hand side");
    }
    if (x0.size() != sys.dim) {
        throw ShapeMismatch("initial state dimension does not match the system");
    }
    if (!grid.is_uniform()) {
        throw DomainError("integrate expects a uniform grid");
    }
    const double dt = grid.step();

    Matrix states(sys.dim, grid.samples());
    states.col(0) = x0;
    Vector x = x0;
    for (Index k = 0; k + 1 < grid.samples(); ++k) {
        const Vector k1 = sys.rhs(x);
        const Vector k2 = sys.rhs(x + 0.5 * dt * k1);
        const Vector k3 = sys.rhs(x + 0.5 * dt * k2);
        const Vector k4 = sys.rhs(x + dt * k3);
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!x.allFinite()) {
            throw NonFiniteState("state became non-finite at t = " +
                                 std::to_string(grid.points(k + 1)));
        }
        states.col(k + 1) = x;
    }
    return Trajectory{std::move(states), grid};
}

SystemSpec finite_time_system()
{
    SystemSpec sys;
    sys.dim = 1;
    sys.rhs = [](const Vector& x) {
        Vector out(1);
        out(0) = -2.0 * std::sqrt(std::max(x(0), 0.0));
        return out;
    };
    sys.closed_form = [](double t) {
        Vector out(1);
        const double r = 1.0 - t;
        out(0) = t < 1.0 ? r * r : 0.0;
        return out;
    };
    sys.label = "finite_time";
    return sys;
}

SystemSpec nonlinear_2d_system()
{
    SystemSpec sys;
    sys.dim = 2;
    sys.rhs = [](const Vector& x) {
        Vector out(2);
        out(0) = x(0);
        out(1) = x(1) - x(0) * x(0);
        return out;
    };
    sys.closed_form = [](double t) {
        Vector out(2);
        out(0) = std::exp(t);
        out(1) = 2.0 * std::exp(t) - std::exp(2.0 * t);
        return out;
    };
    sys.label = "nonlinear_2d";
    return sys;
}

Trajectory zero_homogeneous_trajectory(const Vector& direction, double lambda,
                                       const TimeGrid& grid)
{
    if (!(lambda > 0.0)) {
        throw DomainError("decay rate must be positive");
    }
    if (grid.start() < 0.0 || grid.end() >= 1.0 / lambda) {
        throw DomainError("grid must stay inside [0, 1/lambda)");
    }
    Matrix states(direction.size(), grid.samples());
    for (Index k = 0; k < grid.samples(); ++k) {
        states.col(k) = direction * (1.0 - lambda * grid.points(k));
    }
    return Trajectory{std::move(states), grid};
}

Trajectory synthetic_pde_trajectory(const Vector& mode1, double lambda1,
                                    const Vector& mode2, double lambda2,
                                    const TimeGrid& grid)
{
    if (mode1.size() != mode2.size()) {
        throw ShapeMismatch("spatial modes must have equal length");
    }
    if (!(lambda1 > 0.0) || !(lambda2 > 0.0)) {
        throw DomainError("decay rates must be positive");
    }
    if (grid.start() < 0.0) {
        throw DomainError("grid must start at or after zero");
    }
    Matrix states(mode1.size(), grid.samples());
    for (Index k = 0; k < grid.samples(); ++k) {
        const double t = grid.points(k);
        states.col(k) = mode1 * std::max(0.0, 1.0 - lambda1 * t) +
                        mode2 * std::max(0.0, 1.0 - lambda2 * t);
    }
    return Trajectory{std::move(states), grid};
}

Vector bump_profile(Index points, double center, double width, double amplitude)
{
    if (points < 2 || !(width > 0.0)) {
        throw DomainError("bump profile needs two or more points and positive width");
    }
    Vector out = Vector::Zero(points);
    for (Index i = 0; i < points; ++i) {
        const double xi = static_cast<double>(i) / static_cast<double>(points - 1);
        const double s = (xi - center) / width;
        if (std::abs(s) < 1.0) {
            out(i) = amplitude * std::exp(1.0 - 1.0 / (1.0 - s * s));
        }
    }
    return out;
}

std::optional<Index> detect_equilibrium(const Trajectory& traj, double tol)
{
    if (traj.samples() < 2) {
        throw TooFewSnapshots("equilibrium detection needs at least two snapshots");
    }
    const double dt = traj.grid.step();
    Index first_quiet = 0;
    bool quiet_tail = true;
    for (Index k = traj.samples() - 2; k >= 0; --k) {
        const double speed = (traj.states.col(k + 1) - traj.states.col(k)).norm() / dt;
        if (speed >= tol) {
            first_quiet = k + 1;
            quiet_tail = first_quiet <= traj.samples() - 2;
            break;
        }
        if (k == 0) {
            return 0;
        }
    }
    if (!quiet_tail) {
        return std::nullopt;
    }
    return first_quiet;
}

} // namespace koop
