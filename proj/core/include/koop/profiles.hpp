#pragma once

#include <vector>

#include "koop/dynamics.hpp"

namespace koop {

/// Shape of the scalar decay profiles a dictionary is built from.
/// Every profile starts at a_lambda(0) = 1 and decreases monotonically.
enum class ProfileKind {
    Exponential,     // exp(-lambda t)
    TruncatedLinear, // max(0, 1 - lambda t)
    TruncatedPower,  // max(0, 1 - lambda t)^p
};

[[nodiscard]] const char* to_string(ProfileKind kind);

/// A parameterized set of profiles sharing one shape.
struct ProfileFamily {
    ProfileKind kind = ProfileKind::TruncatedLinear;
    std::vector<double> lambdas; // strictly positive, strictly ascending
    double power = 2.0;          // exponent for TruncatedPower
};

/// a_lambda(t) for the family's shape. Negative t is rejected with DomainError.
double atom_value(const ProfileFamily& family, double lambda, double t);

/// The time at which the profile takes the given value:
///   Exponential      -ln(value) / lambda
///   TruncatedLinear  (1 - value) / lambda
///   TruncatedPower   (1 - value^(1/p)) / lambda
/// Values outside (0, 1] are not attained at a unique finite time and
/// throw OutOfRange.
double atom_inverse(const ProfileFamily& family, double lambda, double value);

/// Profiles sampled on a time grid, one row per lambda.
struct ProfileDictionary {
    ProfileFamily family;
    TimeGrid grid;
    Matrix atoms;    // (number of lambdas) x samples, unnormalized
    Vector row_norms;

    [[nodiscard]] Index size() const { return atoms.rows(); }
};

/// Samples every family member on the grid. Throws DegenerateFamily when
/// lambdas are not strictly positive and ascending, and DomainError when the
/// grid starts before zero.
ProfileDictionary build_dictionary(const ProfileFamily& family, const TimeGrid& grid);

/// Log-spaced lambda values covering [lo, hi] at the given density per decade.
std::vector<double> log_spaced_lambdas(double lo, double hi, int per_decade = 60);

/// Lambda grid with `count` log-spaced values plus the `include` values
/// inserted exactly (duplicates collapsed, result re-sorted).
std::vector<double> lambda_grid(double lo, double hi, int count,
                                const std::vector<double>& include = {});

/// Largest normalized inner product between distinct atoms. Diagnostic
/// only; high coherence is expected for dense lambda grids.
double dictionary_coherence(const ProfileDictionary& dict);

struct InversionReport {
    Vector times;              // recovered time per selected atom
    double max_disagreement;   // spread between the atoms' answers
};

/// Inverts each selected atom at its observed value and reports how far the
/// recovered times disagree (a model-mismatch diagnostic). OutOfRange from
/// any single atom is rethrown with the atom index in the message.
InversionReport dictionary_inverse(const ProfileDictionary& dict,
                                   const std::vector<int>& selected,
                                   const Vector& values);

} // namespace koop
