#include "koop/koopman.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <sstream>

namespace koop {

namespace {

constexpr double kResidualFloor = 1e-12;

double default_step(const Vector& x, double h)
{
    return h > 0.0 ? h : 1e-5 * (1.0 + x.norm());
}

bool is_integer(double v)
{
    return std::abs(v - std::round(v)) == 0.0;
}

/// Principal-branch power that records when the branch choice actually
/// mattered: a non-positive real base raised to a non-integer exponent.
Complex branch_checked_pow(Complex base, Complex exponent,
                           const std::shared_ptr<std::atomic<bool>>& flag)
{
    const bool base_on_cut = base.imag() == 0.0 && base.real() <= 0.0;
    const bool exponent_integer = exponent.imag() == 0.0 && is_integer(exponent.real());
    if (base_on_cut && !exponent_integer && base != Complex{0.0, 0.0}) {
        if (!flag->exchange(true)) {
            std::clog << "kef power: principal branch chosen for a non-positive "
                         "real base\n";
        }
    }
    return std::pow(base, exponent);
}

std::string complex_label(Complex z)
{
    std::ostringstream os;
    os << z.real();
    if (z.imag() != 0.0) {
        os << (z.imag() > 0.0 ? "+" : "") << z.imag() << "i";
    }
    return os.str();
}

} // namespace

ComplexVector KefVector::eigenvalues() const
{
    ComplexVector out(size());
    for (Index i = 0; i < size(); ++i) {
        out(i) = entries[static_cast<size_t>(i)].eigenvalue;
    }
    return out;
}

ComplexVector KefVector::operator()(const Vector& x) const
{
    ComplexVector out(size());
    for (Index i = 0; i < size(); ++i) {
        out(i) = entries[static_cast<size_t>(i)].evaluate(x);
    }
    return out;
}

Kef kef_analytic(std::string label, Complex eigenvalue,
                 std::function<Complex(const Vector&)> evaluate)
{
    if (!evaluate) {
        throw ValidationError("analytic eigenfunction needs an evaluator");
    }
    Kef kef;
    kef.eigenvalue = eigenvalue;
    kef.evaluate = std::move(evaluate);
    kef.provenance = {"analytic", std::move(label), {}};
    return kef;
}

Kef kef_from_mapping(const ProfileFamily& family, double lambda, const Vector& mode,
                     double alpha, double beta)
{
    if (!(lambda > 0.0)) {
        throw DomainError("lambda must be positive");
    }
    if (!(mode.norm() > 0.0)) {
        throw ValidationError("mode must be nonzero");
    }
    const double scale = mode.squaredNorm();
    const bool truncated = family.kind != ProfileKind::Exponential;

    Kef kef;
    kef.eigenvalue = Complex{alpha, 0.0};
    kef.evaluate = [family, lambda, mode, alpha, beta, scale,
                    truncated](const Vector& x) -> Complex {
        if (x.size() != mode.size()) {
            throw ShapeMismatch("state dimension does not match the mode");
        }
        double proj = mode.dot(x) / scale;
        if (proj > 1.0 && proj <= 1.0 + 1e-9) {
            proj = 1.0; // rounding overshoot at the start of a trajectory
        }
        double t = 0.0;
        if (truncated && proj <= 0.0) {
            // The truncated profiles attain 0 at their vanishing time, so the
            // inverse extends continuously to the extinct boundary; slightly
            // negative projections are integrator noise around that boundary.
            t = 1.0 / lambda;
        } else {
            t = atom_inverse(family, lambda, proj);
        }
        return Complex{std::exp(alpha * t + beta), 0.0};
    };
    std::ostringstream detail;
    detail << to_string(family.kind) << " lambda=" << lambda << " alpha=" << alpha
           << " beta=" << beta;
    kef.provenance = {"mapping", detail.str(), {}};
    return kef;
}

Kef kef_from_linear_profile(const Vector& mode, double rate)
{
    if (!(mode.norm() > 0.0)) {
        throw ValidationError("mode must be nonzero");
    }
    if (rate == 0.0) {
        throw DomainError("rate must be nonzero");
    }
    const double scale = mode.squaredNorm() * rate;
    Kef kef;
    kef.eigenvalue = Complex{1.0, 0.0};
    kef.evaluate = [mode, scale](const Vector& x) -> Complex {
        if (x.size() != mode.size()) {
            throw ShapeMismatch("state dimension does not match the mode");
        }
        return Complex{std::exp(mode.dot(x) / scale), 0.0};
    };
    std::ostringstream detail;
    detail << "rate=" << rate;
    kef.provenance = {"linear_profile", detail.str(), {}};
    return kef;
}

Kef kef_scale(const Kef& phi, double a)
{
    if (a == 0.0) {
        throw ZeroScale("scaling an eigenfunction by zero destroys it");
    }
    Kef kef;
    kef.eigenvalue = phi.eigenvalue;
    auto parent = phi.evaluate;
    kef.evaluate = [parent, a](const Vector& x) { return a * parent(x); };
    std::ostringstream detail;
    detail << "a=" << a;
    kef.provenance = {"scale", detail.str(), {phi.provenance}};
    return kef;
}

Kef kef_power(const Kef& phi, Complex alpha)
{
    if (alpha == Complex{0.0, 0.0}) {
        throw ValidationError("power exponent must be nonzero");
    }
    Kef kef;
    kef.eigenvalue = alpha * phi.eigenvalue;
    auto parent = phi.evaluate;
    auto flag = kef.branch_ambiguity;
    kef.evaluate = [parent, alpha, flag](const Vector& x) {
        return branch_checked_pow(parent(x), alpha, flag);
    };
    kef.provenance = {"power", "alpha=" + complex_label(alpha), {phi.provenance}};
    return kef;
}

Kef kef_product(const Kef& phi1, const Kef& phi2, double n, double m)
{
    Kef kef;
    kef.eigenvalue = n * phi1.eigenvalue + m * phi2.eigenvalue;
    auto p1 = phi1.evaluate;
    auto p2 = phi2.evaluate;
    auto flag = kef.branch_ambiguity;
    kef.evaluate = [p1, p2, n, m, flag](const Vector& x) {
        return branch_checked_pow(p1(x), Complex{n, 0.0}, flag) *
               branch_checked_pow(p2(x), Complex{m, 0.0}, flag);
    };
    std::ostringstream detail;
    detail << "n=" << n << " m=" << m;
    kef.provenance = {"product", detail.str(), {phi1.provenance, phi2.provenance}};
    return kef;
}

Kef kef_combine(const Kef& phi1, const Kef& phi2, Complex target)
{
    if (phi1.eigenvalue == Complex{0.0, 0.0} || phi2.eigenvalue == Complex{0.0, 0.0}) {
        throw ZeroEigenvalueParent(
            "combining requires parents with nonzero eigenvalues");
    }
    Kef kef;
    kef.eigenvalue = target;
    const Complex e1 = target / phi1.eigenvalue;
    const Complex e2 = target / phi2.eigenvalue;
    auto p1 = phi1.evaluate;
    auto p2 = phi2.evaluate;
    auto flag = kef.branch_ambiguity;
    kef.evaluate = [p1, p2, e1, e2, flag](const Vector& x) {
        return branch_checked_pow(p1(x), e1, flag) +
               branch_checked_pow(p2(x), e2, flag);
    };
    kef.provenance = {"combine", "lambda=" + complex_label(target),
                      {phi1.provenance, phi2.provenance}};
    return kef;
}

std::vector<Window> extinction_windows(const Trajectory& traj, double equilibrium_tol,
                                       const std::vector<double>& vanishing_times,
                                       double width_fraction)
{
    const double span = traj.grid.end() - traj.grid.start();
    const double width = width_fraction * span;
    std::vector<Window> windows;
    if (const auto idx = detect_equilibrium(traj, equilibrium_tol)) {
        const double t = traj.grid.points(*idx);
        windows.push_back({t - width, t + width});
    }
    for (double t : vanishing_times) {
        windows.push_back({t - width, t + width});
    }
    return windows;
}

ResidualStats eigen_residual(const Kef& phi, const Trajectory& traj,
                             const std::vector<Window>& exclude)
{
    if (traj.samples() < 3) {
        throw TooFewSnapshots("central differences need at least three snapshots");
    }
    const double dt = traj.grid.step();
    ResidualStats stats;
    double sum = 0.0;
    for (Index k = 1; k + 1 < traj.samples(); ++k) {
        const double t = traj.grid.points(k);
        const bool excluded =
            std::any_of(exclude.begin(), exclude.end(),
                        [t](const Window& w) { return w.contains(t); });
        if (excluded) {
            ++stats.excluded;
            continue;
        }
        const Complex ahead = phi.evaluate(traj.states.col(k + 1));
        const Complex behind = phi.evaluate(traj.states.col(k - 1));
        const Complex here = phi.evaluate(traj.states.col(k));
        const Complex fd = (ahead - behind) / (2.0 * dt);
        const Complex target = phi.eigenvalue * here;
        const double res =
            std::abs(fd - target) / std::max(std::abs(target), kResidualFloor);
        stats.max_residual = std::max(stats.max_residual, res);
        sum += res;
        ++stats.evaluated;
    }
    stats.mean_residual = stats.evaluated > 0 ? sum / stats.evaluated : 0.0;
    return stats;
}

ComplexMatrix jacobian(const KefVector& kefs, const Vector& x, double h)
{
    if (kefs.size() == 0) {
        throw ValidationError("empty eigenfunction stack");
    }
    const double step = default_step(x, h);
    ComplexMatrix jac(kefs.size(), x.size());
    Vector probe = x;
    for (Index j = 0; j < x.size(); ++j) {
        probe(j) = x(j) + step;
        const ComplexVector ahead = kefs(probe);
        probe(j) = x(j) - step;
        const ComplexVector behind = kefs(probe);
        probe(j) = x(j);
        jac.col(j) = (ahead - behind) / (2.0 * step);
    }
    return jac;
}

ObservabilityReport observability_rank(const KefVector& kefs, const Trajectory& traj,
                                       double h, double tol, Index max_samples)
{
    if (max_samples < 1) {
        throw ValidationError("need at least one sample");
    }
    const Index n = std::min(max_samples, traj.samples());
    ObservabilityReport report;
    report.tolerance = tol;

    Index observable = 0;
    for (Index i = 0; i < n; ++i) {
        const Index k =
            n == 1 ? 0 : (i * (traj.samples() - 1) + (n - 1) / 2) / (n - 1);
        ComplexMatrix jac;
        try {
            jac = jacobian(kefs, traj.states.col(k), h);
        } catch (const OutOfRange&) {
            continue; // snapshot outside the stack's domain
        }
        Eigen::JacobiSVD<ComplexMatrix> svd(jac);
        const Vector& sv = svd.singularValues();
        Index rank = 0;
        for (Index s = 0; s < sv.size(); ++s) {
            if (sv(s) > tol * sv(0)) {
                ++rank;
            }
        }
        report.sample_indices.push_back(k);
        report.ranks.push_back(rank);
        if (rank == traj.dim()) {
            ++observable;
        }
    }
    const size_t total = report.ranks.size();
    report.verdict = (total > 0 && 20 * static_cast<size_t>(observable) >= 19 * total)
                         ? Observability::Full
                         : Observability::Deficient;
    return report;
}

Vector reconstruct_dynamics(const KefVector& kefs, const Vector& x, double h)
{
    const ComplexMatrix jac = jacobian(kefs, x, h);
    Eigen::JacobiSVD<ComplexMatrix> svd(jac, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();
    Index rank = 0;
    for (Index s = 0; s < sv.size(); ++s) {
        if (sv(s) > 1e-8 * sv(0)) {
            ++rank;
        }
    }
    if (rank < x.size()) {
        throw RankDeficientJacobian("eigenfunction stack sees only " +
                                    std::to_string(rank) + " of " +
                                    std::to_string(x.size()) + " directions");
    }
    const ComplexVector target =
        kefs.eigenvalues().cwiseProduct(kefs(x));
    return svd.solve(target).real();
}

double koopman_mode_check(const Matrix& modes, const KefVector& kefs,
                          const Trajectory& traj, double h)
{
    if (modes.cols() != kefs.size() || modes.rows() != traj.dim()) {
        throw ShapeMismatch("mode matrix must be state dim x stack size");
    }
    if (traj.samples() < 3) {
        throw TooFewSnapshots("central differences need at least three snapshots");
    }
    const double dt = traj.grid.step();
    double worst = 0.0;
    for (Index k = 1; k + 1 < traj.samples(); ++k) {
        const Vector velocity =
            (traj.states.col(k + 1) - traj.states.col(k - 1)) / (2.0 * dt);
        const double scale = velocity.norm();
        if (scale < kResidualFloor) {
            continue;
        }
        const ComplexMatrix jac = jacobian(kefs, traj.states.col(k), h);
        const ComplexVector mapped =
            modes.cast<Complex>() * (jac * velocity.cast<Complex>());
        worst = std::max(worst, (mapped - velocity.cast<Complex>()).norm() / scale);
    }
    return worst;
}

Matrix recover_profiles(const Matrix& modes, const Matrix& data)
{
    if (modes.rows() != data.rows()) {
        throw ShapeMismatch("modes and data must share the spatial dimension");
    }
    const Matrix gram = modes.transpose() * modes;
    Eigen::JacobiSVD<Matrix> svd(gram);
    const Vector& sv = svd.singularValues();
    if (!(sv(sv.size() - 1) > 0.0) || sv(0) / sv(sv.size() - 1) > 1e12) {
        throw IllConditionedModes("mode Gram matrix condition number exceeds 1e12");
    }
    return gram.ldlt().solve(modes.transpose() * data);
}

TimeMappingReport time_mapping_from_modes(const SparseDecomposition& dec,
                                          const Matrix& data)
{
    const Matrix profiles = recover_profiles(dec.modes, data);
    const Index s = profiles.rows();
    const Index samples = profiles.cols();
    ProfileFamily family{dec.kind, {}, dec.power};

    TimeMappingReport report;
    report.times = Matrix::Constant(s, samples, std::numeric_limits<double>::quiet_NaN());
    report.valid.setConstant(s, samples, false);
    report.disagreement =
        Vector::Constant(samples, std::numeric_limits<double>::quiet_NaN());

    for (Index k = 0; k < samples; ++k) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        Index valid_count = 0;
        for (Index i = 0; i < s; ++i) {
            double value = profiles(i, k);
            if (value > 1.0 && value <= 1.0 + 1e-9) {
                value = 1.0;
            }
            if (!(value > 0.0) || value > 1.0) {
                continue; // flagged: outside the invertible range
            }
            const double t = atom_inverse(family, dec.selected_lambdas(i), value);
            report.times(i, k) = t;
            report.valid(i, k) = true;
            lo = std::min(lo, t);
            hi = std::max(hi, t);
            ++valid_count;
        }
        if (valid_count >= 2) {
            report.disagreement(k) = hi - lo;
        }
    }
    return report;
}

EigenfunctionalSeries eigenfunctional_series(const SparseDecomposition& dec,
                                             const Trajectory& traj,
                                             double fit_margin)
{
    const Matrix profiles = recover_profiles(dec.modes, traj.states);
    const Index s = profiles.rows();
    const Index samples = profiles.cols();

    EigenfunctionalSeries out;
    out.series = profiles.array() - 1.0;
    out.fits.resize(static_cast<size_t>(s));

    for (Index i = 0; i < s; ++i) {
        SeriesFit& fit = out.fits[static_cast<size_t>(i)];
        double window_end = traj.grid.end();
        if (dec.kind != ProfileKind::Exponential) {
            window_end =
                std::min(window_end, 1.0 / dec.selected_lambdas(i) - fit_margin);
        }
        fit.fit_end = window_end;

        double st = 0.0, stt = 0.0, sy = 0.0, sty = 0.0;
        Index n = 0;
        for (Index k = 0; k < samples; ++k) {
            const double t = traj.grid.points(k);
            if (t > window_end) {
                break;
            }
            const double y = out.series(i, k);
            st += t;
            stt += t * t;
            sy += y;
            sty += t * y;
            ++n;
        }
        if (n < 2) {
            throw TooFewSnapshots("linear fit window holds fewer than two samples");
        }
        const double denom = n * stt - st * st;
        fit.slope = (n * sty - st * sy) / denom;
        fit.intercept = (sy * stt - st * sty) / denom;

        double ss = 0.0;
        double post = 0.0;
        for (Index k = 0; k < samples; ++k) {
            const double t = traj.grid.points(k);
            const double dev = out.series(i, k) - (fit.slope * t + fit.intercept);
            if (t <= window_end) {
                ss += dev * dev;
            } else {
                post = std::max(post, std::abs(dev));
            }
        }
        fit.rms = std::sqrt(ss / static_cast<double>(n));
        fit.max_post_deviation = post;
    }
    return out;
}

double kmd_truncated_expansion(double phi_value, double lambda, int terms)
{
    if (terms < 1) {
        throw ValidationError("need at least one term");
    }
    const double u = phi_value - 1.0;
    if (!(std::abs(u) < 1.0)) {
        throw RadiusExceeded("series converges only for |phi - 1| < 1");
    }
    double sum = 0.0;
    double power = 1.0;
    for (int n = 1; n <= terms; ++n) {
        power *= u;
        sum += (n % 2 == 1 ? 1.0 : -1.0) * power / static_cast<double>(n);
    }
    return 1.0 - lambda * sum;
}

} // namespace koop
