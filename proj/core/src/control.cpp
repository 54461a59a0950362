#include "koop/control.hpp"

#include <cmath>

namespace koop {

SystemSpec bistable_cubic_system()
{
    SystemSpec sys;
    sys.dim = 1;
    sys.rhs = [](const Vector& x) {
        Vector out(1);
        out(0) = x(0) - x(0) * x(0) * x(0);
        return out;
    };
    sys.label = "bistable_cubic";
    return sys;
}

Kef bistable_cubic_kef()
{
    return kef_analytic("x/sqrt(1-x^2)", Complex{1.0, 0.0}, [](const Vector& x) {
        if (x.size() != 1) {
            throw ShapeMismatch("scalar eigenfunction got a non-scalar state");
        }
        const double v = x(0);
        if (std::abs(v) >= 1.0) {
            throw OutOfRange("eigenfunction is defined on |x| < 1");
        }
        return Complex{v / std::sqrt(1.0 - v * v), 0.0};
    });
}

std::function<Vector(const Vector&)> bistable_cubic_cancel()
{
    return [](const Vector& x) {
        Vector out(1);
        out(0) = -x(0) * (1.0 - x(0) * x(0));
        return out;
    };
}

std::function<Vector(const Vector&)> feedback_linearize(const Kef& phi,
                                                        const SystemSpec& sys,
                                                        double h)
{
    if (sys.dim != 1) {
        throw ValidationError("feedback linearization handles scalar systems only");
    }
    if (!phi.evaluate) {
        throw ValidationError("eigenfunction has no evaluator");
    }
    const Complex lambda = phi.eigenvalue;
    auto evaluate = phi.evaluate;
    return [evaluate, lambda, h](const Vector& x) {
        const double step = h > 0.0 ? h : 1e-5 * (1.0 + x.norm());
        Vector probe = x;
        probe(0) = x(0) + step;
        const Complex ahead = evaluate(probe);
        probe(0) = x(0) - step;
        const Complex behind = evaluate(probe);
        const Complex derivative = (ahead - behind) / (2.0 * step);
        const Complex value = evaluate(x);
        if (std::abs(derivative) <= 1e-12 * std::max(1.0, std::abs(lambda * value))) {
            throw SingularJacobian("eigenfunction derivative vanishes at x = " +
                                   std::to_string(x(0)));
        }
        Vector out(1);
        out(0) = -(lambda * value / derivative).real();
        return out;
    };
}

std::function<Vector(const Vector&)> proportional_law(const Vector& target, double gain)
{
    return [target, gain](const Vector& x) { return (-gain * (x - target)).eval(); };
}

ClosedLoopResult simulate_closed_loop(const SystemSpec& sys, const Controller& ctrl,
                                      const Vector& x0, const TimeGrid& grid)
{
    if (!ctrl.cancel_term || !ctrl.outer_law) {
        throw ValidationError("controller needs both a cancel term and an outer law");
    }
    SystemSpec closed;
    closed.dim = sys.dim;
    closed.label = sys.label + "+feedback";
    auto rhs = sys.rhs;
    auto cancel = ctrl.cancel_term;
    auto outer = ctrl.outer_law;
    auto admissible = ctrl.admissible;
    closed.rhs = [rhs, cancel, outer, admissible](const Vector& x) {
        if (admissible && !admissible(x)) {
            throw InadmissibleState("closed-loop state left the admissible region");
        }
        return (rhs(x) + cancel(x) + outer(x)).eval();
    };

    ClosedLoopResult result;
    result.trajectory = integrate(closed, x0, grid);
    result.x0 = x0;
    result.target = ctrl.target;
    const Index last = result.trajectory.samples() - 1;
    result.final_error = (result.trajectory.states.col(last) - ctrl.target).norm();
    result.settling_time = -1.0;
    for (Index k = 0; k <= last; ++k) {
        if ((result.trajectory.states.col(k) - ctrl.target).norm() < 1e-2) {
            result.settling_time = result.trajectory.grid.points(k);
            break;
        }
    }
    return result;
}

} // namespace koop
