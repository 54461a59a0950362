#pragma once

#include <stdexcept>
#include <string>

namespace koop {

/// Base class for every failure the library reports.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Inputs that are malformed regardless of their numerical content:
/// bad shapes, bad parameters, grids outside an admissible range.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Failures that depend on the data: non-convergence, singular or
/// ill-conditioned matrices, states leaving an evaluator's domain.
class NumericalError : public Error {
public:
    using Error::Error;
};

#define KOOP_DEFINE_ERROR(Name, Base)                                         \
    class Name : public Base {                                                \
    public:                                                                   \
        using Base::Base;                                                     \
    }

KOOP_DEFINE_ERROR(NonFiniteState, NumericalError);
KOOP_DEFINE_ERROR(DomainError, ValidationError);
KOOP_DEFINE_ERROR(TooFewSnapshots, ValidationError);
KOOP_DEFINE_ERROR(RankTooLarge, ValidationError);
KOOP_DEFINE_ERROR(ShapeMismatch, ValidationError);
KOOP_DEFINE_ERROR(DegenerateFamily, ValidationError);
KOOP_DEFINE_ERROR(ZeroScale, ValidationError);
KOOP_DEFINE_ERROR(ZeroEigenvalueParent, ValidationError);

KOOP_DEFINE_ERROR(SingularData, NumericalError);
KOOP_DEFINE_ERROR(DefectiveMap, NumericalError);
KOOP_DEFINE_ERROR(OutOfRange, NumericalError);
KOOP_DEFINE_ERROR(NoConvergence, NumericalError);
KOOP_DEFINE_ERROR(IllConditionedRefit, NumericalError);
KOOP_DEFINE_ERROR(EmptySupport, NumericalError);
KOOP_DEFINE_ERROR(IllConditionedModes, NumericalError);
KOOP_DEFINE_ERROR(RankDeficientJacobian, NumericalError);
KOOP_DEFINE_ERROR(RadiusExceeded, NumericalError);
KOOP_DEFINE_ERROR(SingularJacobian, NumericalError);
KOOP_DEFINE_ERROR(InadmissibleState, NumericalError);

#undef KOOP_DEFINE_ERROR

} // namespace koop
