#include "koop/profiles.hpp"

#include <algorithm>
#include <cmath>

namespace koop {

const char* to_string(ProfileKind kind)
{
    switch (kind) {
    case ProfileKind::Exponential: return "exponential";
    case ProfileKind::TruncatedLinear: return "truncated_linear";
    case ProfileKind::TruncatedPower: return "truncated_power";
    }
    return "unknown";
}

namespace {

void check_family(const ProfileFamily& family)
{
    if (family.lambdas.empty()) {
        throw DegenerateFamily("family has no lambda values");
    }
    double prev = 0.0;
    for (double lambda : family.lambdas) {
        if (!(lambda > prev)) {
            throw DegenerateFamily("lambdas must be strictly positive and ascending");
        }
        prev = lambda;
    }
    if (family.kind == ProfileKind::TruncatedPower && !(family.power > 0.0)) {
        throw DegenerateFamily("truncated-power families need a positive exponent");
    }
}

} // namespace

double atom_value(const ProfileFamily& family, double lambda, double t)
{
    if (t < 0.0) {
        throw DomainError("profiles are defined for t >= 0");
    }
    if (!(lambda > 0.0)) {
        throw DomainError("lambda must be positive");
    }
    switch (family.kind) {
    case ProfileKind::Exponential:
        return std::exp(-lambda * t);
    case ProfileKind::TruncatedLinear:
        return std::max(0.0, 1.0 - lambda * t);
    case ProfileKind::TruncatedPower:
        return std::pow(std::max(0.0, 1.0 - lambda * t), family.power);
    }
    throw ValidationError("unknown profile kind");
}

double atom_inverse(const ProfileFamily& family, double lambda, double value)
{
    if (!(lambda > 0.0)) {
        throw DomainError("lambda must be positive");
    }
    if (!(value > 0.0) || value > 1.0) {
        throw OutOfRange("profile value " + std::to_string(value) +
                         " is outside (0, 1]");
    }
    switch (family.kind) {
    case ProfileKind::Exponential:
        return -std::log(value) / lambda;
    case ProfileKind::TruncatedLinear:
        return (1.0 - value) / lambda;
    case ProfileKind::TruncatedPower:
        return (1.0 - std::pow(value, 1.0 / family.power)) / lambda;
    }
    throw ValidationError("unknown profile kind");
}

ProfileDictionary build_dictionary(const ProfileFamily& family, const TimeGrid& grid)
{
    check_family(family);
    if (grid.start() < 0.0) {
        throw DomainError("profile dictionaries live on t >= 0");
    }
    const Index rows = static_cast<Index>(family.lambdas.size());
    Matrix atoms(rows, grid.samples());
    for (Index i = 0; i < rows; ++i) {
        for (Index k = 0; k < grid.samples(); ++k) {
            atoms(i, k) = atom_value(family, family.lambdas[static_cast<size_t>(i)],
                                     grid.points(k));
        }
    }
    ProfileDictionary dict;
    dict.family = family;
    dict.grid = grid;
    dict.row_norms = atoms.rowwise().norm();
    for (Index i = 0; i < rows; ++i) {
        if (!(dict.row_norms(i) > 0.0)) {
            throw DegenerateFamily("atom " + std::to_string(i) +
                                   " vanishes on the whole grid");
        }
    }
    dict.atoms = std::move(atoms);
    return dict;
}

std::vector<double> log_spaced_lambdas(double lo, double hi, int per_decade)
{
    if (!(lo > 0.0) || !(hi > lo) || per_decade < 1) {
        throw DomainError("need 0 < lo < hi and at least one point per decade");
    }
    const double decades = std::log10(hi / lo);
    const int count = std::max(2, static_cast<int>(std::lround(decades * per_decade)) + 1);
    std::vector<double> out(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
        out[static_cast<size_t>(i)] =
            lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1));
    }
    out.back() = hi;
    return out;
}

std::vector<double> lambda_grid(double lo, double hi, int count,
                                const std::vector<double>& include)
{
    if (!(lo > 0.0) || !(hi > lo) || count < 2) {
        throw DomainError("need 0 < lo < hi and at least two grid points");
    }
    std::vector<double> out;
    out.reserve(static_cast<size_t>(count) + include.size());
    for (int i = 0; i < count; ++i) {
        out.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1)));
    }
    out[static_cast<size_t>(count) - 1] = hi;
    for (double v : include) {
        if (!(v > 0.0)) {
            throw DomainError("included lambdas must be positive");
        }
        out.push_back(v);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

double dictionary_coherence(const ProfileDictionary& dict)
{
    const Index rows = dict.size();
    double best = 0.0;
    for (Index i = 0; i < rows; ++i) {
        for (Index j = i + 1; j < rows; ++j) {
            const double ip = std::abs(dict.atoms.row(i).dot(dict.atoms.row(j))) /
                              (dict.row_norms(i) * dict.row_norms(j));
            best = std::max(best, ip);
        }
    }
    return best;
}

InversionReport dictionary_inverse(const ProfileDictionary& dict,
                                   const std::vector<int>& selected,
                                   const Vector& values)
{
    if (static_cast<Index>(selected.size()) != values.size()) {
        throw ShapeMismatch("one value per selected atom is required");
    }
    InversionReport report;
    report.times.resize(values.size());
    for (Index i = 0; i < values.size(); ++i) {
        const int atom = selected[static_cast<size_t>(i)];
        if (atom < 0 || atom >= dict.size()) {
            throw ValidationError("selected atom index out of bounds");
        }
        try {
            report.times(i) = atom_inverse(dict.family,
                                           dict.family.lambdas[static_cast<size_t>(atom)],
                                           values(i));
        } catch (const OutOfRange& e) {
            throw OutOfRange("atom " + std::to_string(atom) + ": " + e.what());
        }
    }
    report.max_disagreement =
        values.size() > 1 ? report.times.maxCoeff() - report.times.minCoeff() : 0.0;
    return report;
}

} // namespace koop
