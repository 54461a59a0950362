#pragma once

#include "koop/dynamics.hpp"
#include "koop/koopman.hpp"

namespace koop {

/// Feedback law u(x) = cancel_term(x) + outer_law(x) with an optional
/// admissibility predicate guarding the eigenfunction's domain.
struct Controller {
    std::function<Vector(const Vector&)> cancel_term;
    std::function<Vector(const Vector&)> outer_law;
    Vector target;
    std::function<bool(const Vector&)> admissible;
};

/// Scalar system x' = x - x^3 (stable equilibria at -1 and 1, unstable
/// at 0). The demo plant for feedback linearization.
SystemSpec bistable_cubic_system();

/// Closed-form eigenfunction x / sqrt(1 - x^2) of the bistable cubic
/// system on |x| < 1, eigenvalue 1.
Kef bistable_cubic_kef();

/// Exact cancellation -x (1 - x^2) of the bistable cubic drift: adding it
/// to the plant leaves x' = u.
std::function<Vector(const Vector&)> bistable_cubic_cancel();

/// Cancellation term -J(x)^{-1} * lambda * phi(x) from a scalar
/// eigenfunction, with J the numerical derivative of phi (step h, same
/// default as jacobian). Returns a map usable as Controller::cancel_term.
/// The returned map throws SingularJacobian where |J| vanishes and
/// OutOfRange outside phi's domain.
std::function<Vector(const Vector&)> feedback_linearize(const Kef& phi,
                                                        const SystemSpec& sys,
                                                        double h = 0.0);

/// u(x) = -gain * (x - target), the outer loop of the demo controller.
std::function<Vector(const Vector&)> proportional_law(const Vector& target,
                                                      double gain = 1.0);

struct ClosedLoopResult {
    Trajectory trajectory;
    Vector x0;
    Vector target;
    double final_error = 0.0;
    double settling_time = -1.0; // first time ||x - target|| < 1e-2, -1 if never
};

/// Integrates x' = rhs(x) + cancel_term(x) + outer_law(x) on the grid.
/// Throws InadmissibleState as soon as the admissibility predicate fails
/// and NonFiniteState when the state blows up.
ClosedLoopResult simulate_closed_loop(const SystemSpec& sys, const Controller& ctrl,
                                      const Vector& x0, const TimeGrid& grid);

} // namespace koop
