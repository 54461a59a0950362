#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <string>

#include "koop/profiles.hpp"

using namespace koop;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

TEST_CASE("profile kind names")
{
    REQUIRE(std::string(to_string(ProfileKind::Exponential)) == "exponential");
    REQUIRE(std::string(to_string(ProfileKind::TruncatedLinear)) == "truncated_linear");
    REQUIRE(std::string(to_string(ProfileKind::TruncatedPower)) == "truncated_power");
}

TEST_CASE("atom values")
{
    ProfileFamily exp_family{ProfileKind::Exponential, {0.5}, 2.0};
    REQUIRE_THAT(atom_value(exp_family, 0.5, 2.0), WithinAbs(std::exp(-1.0), 1e-15));
    REQUIRE_THAT(atom_value(exp_family, 0.5, 0.0), WithinAbs(1.0, 0.0));

    ProfileFamily lin_family{ProfileKind::TruncatedLinear, {0.5}, 2.0};
    REQUIRE_THAT(atom_value(lin_family, 0.5, 1.0), WithinAbs(0.5, 1e-15));
    REQUIRE(atom_value(lin_family, 0.5, 2.0) == 0.0);
    REQUIRE(atom_value(lin_family, 0.5, 7.0) == 0.0);

    ProfileFamily pow_family{ProfileKind::TruncatedPower, {0.25}, 2.0};
    REQUIRE_THAT(atom_value(pow_family, 0.25, 2.0), WithinAbs(0.25, 1e-15));
    REQUIRE(atom_value(pow_family, 0.25, 4.0) == 0.0);

    REQUIRE_THROWS_AS(atom_value(lin_family, 0.5, -0.1), DomainError);
    REQUIRE_THROWS_AS(atom_value(lin_family, 0.0, 1.0), DomainError);
}

TEST_CASE("atom inversion round trip")
{
    ProfileFamily exp_family{ProfileKind::Exponential, {0.3}, 2.0};
    ProfileFamily lin_family{ProfileKind::TruncatedLinear, {0.2}, 2.0};
    ProfileFamily pow_family{ProfileKind::TruncatedPower, {0.2}, 2.0};

    for (double t : {0.0, 0.4, 1.7, 2.5}) {
        REQUIRE_THAT(atom_inverse(exp_family, 0.3, atom_value(exp_family, 0.3, t)),
                     WithinAbs(t, 1e-12));
        REQUIRE_THAT(atom_inverse(lin_family, 0.2, atom_value(lin_family, 0.2, t)),
                     WithinAbs(t, 1e-12));
        REQUIRE_THAT(atom_inverse(pow_family, 0.2, atom_value(pow_family, 0.2, t)),
                     WithinAbs(t, 1e-12));
    }

    REQUIRE_THROWS_AS(atom_inverse(lin_family, 0.2, 0.0), OutOfRange);
    REQUIRE_THROWS_AS(atom_inverse(lin_family, 0.2, -0.3), OutOfRange);
    REQUIRE_THROWS_AS(atom_inverse(lin_family, 0.2, 1.2), OutOfRange);
    REQUIRE_THROWS_AS(atom_inverse(lin_family, -1.0, 0.5), DomainError);
}

TEST_CASE("dictionary construction")
{
    ProfileFamily family{ProfileKind::TruncatedLinear, {0.1, 0.2, 0.5}, 2.0};
    const TimeGrid grid = TimeGrid::uniform(0.0, 5.0, 51);
    const ProfileDictionary dict = build_dictionary(family, grid);

    REQUIRE(dict.size() == 3);
    REQUIRE(dict.atoms.cols() == 51);
    REQUIRE_THAT(dict.atoms(0, 50), WithinAbs(0.5, 1e-12));
    REQUIRE_THAT(dict.atoms(2, 50), WithinAbs(0.0, 0.0));
    for (Index i = 0; i < dict.size(); ++i) {
        REQUIRE_THAT(dict.row_norms(i), WithinAbs(dict.atoms.row(i).norm(), 1e-14));
        REQUIRE(dict.row_norms(i) > 0.0);
    }
}

TEST_CASE("dictionary construction rejects bad input")
{
    const TimeGrid grid = TimeGrid::uniform(0.0, 5.0, 11);

    REQUIRE_THROWS_AS(build_dictionary({ProfileKind::TruncatedLinear, {}, 2.0}, grid),
                      DegenerateFamily);
    REQUIRE_THROWS_AS(
        build_dictionary({ProfileKind::TruncatedLinear, {0.2, 0.1}, 2.0}, grid),
        DegenerateFamily);
    REQUIRE_THROWS_AS(
        build_dictionary({ProfileKind::TruncatedLinear, {-0.1, 0.2}, 2.0}, grid),
        DegenerateFamily);
    REQUIRE_THROWS_AS(
        build_dictionary({ProfileKind::TruncatedPower, {0.1}, 0.0}, grid),
        DegenerateFamily);

    Vector negative(2);
    negative << -0.5, 0.5;
    REQUIRE_THROWS_AS(build_dictionary({ProfileKind::TruncatedLinear, {0.1}, 2.0},
                                       TimeGrid::from_points(negative)),
                      DomainError);

    // lambda = 10 vanishes everywhere on a grid starting at t = 0.2
    Vector late(3);
    late << 0.2, 0.5, 1.0;
    REQUIRE_THROWS_AS(build_dictionary({ProfileKind::TruncatedLinear, {10.0}, 2.0},
                                       TimeGrid::from_points(late)),
                      DegenerateFamily);
}

TEST_CASE("log-spaced lambda values")
{
    const auto lambdas = log_spaced_lambdas(0.01, 1.0, 5);
    REQUIRE(lambdas.size() == 11);
    REQUIRE_THAT(lambdas.front(), WithinAbs(0.01, 1e-15));
    REQUIRE(lambdas.back() == 1.0);
    REQUIRE(std::is_sorted(lambdas.begin(), lambdas.end()));
    REQUIRE_THAT(lambdas[5], WithinAbs(0.1, 1e-12));

    REQUIRE_THROWS_AS(log_spaced_lambdas(0.0, 1.0, 5), DomainError);
    REQUIRE_THROWS_AS(log_spaced_lambdas(1.0, 0.5, 5), DomainError);
    REQUIRE_THROWS_AS(log_spaced_lambdas(0.1, 1.0, 0), DomainError);
}

TEST_CASE("lambda grid inserts requested values exactly")
{
    const double special = 1.0 / 30.0;
    const auto grid = lambda_grid(0.005, 1.0, 10, {0.1, special});
    REQUIRE(grid.size() == 12);
    REQUIRE(std::is_sorted(grid.begin(), grid.end()));
    REQUIRE(std::find(grid.begin(), grid.end(), 0.1) != grid.end());
    REQUIRE(std::find(grid.begin(), grid.end(), special) != grid.end());

    // an included value already on the grid collapses into one entry
    const auto collapsed = lambda_grid(0.005, 1.0, 10, {1.0});
    REQUIRE(collapsed.size() == 10);

    REQUIRE_THROWS_AS(lambda_grid(0.005, 1.0, 1, {}), DomainError);
    REQUIRE_THROWS_AS(lambda_grid(0.005, 1.0, 10, {-0.1}), DomainError);
}

TEST_CASE("coherence reflects atom similarity")
{
    const TimeGrid grid = TimeGrid::uniform(0.0, 5.0, 51);

    const ProfileDictionary close =
        build_dictionary({ProfileKind::TruncatedLinear, {0.2, 0.2000001}, 2.0}, grid);
    REQUIRE(dictionary_coherence(close) >= 0.999);

    const ProfileDictionary apart =
        build_dictionary({ProfileKind::Exponential, {0.01, 100.0}, 2.0}, grid);
    REQUIRE(dictionary_coherence(apart) < 0.5);
    REQUIRE(dictionary_coherence(apart) > 0.0);
}

TEST_CASE("inverting selected atoms")
{
    ProfileFamily family{ProfileKind::TruncatedLinear, {0.1, 0.2}, 2.0};
    const ProfileDictionary dict = build_dictionary(family, TimeGrid::uniform(0.0, 4.0, 41));

    Vector consistent(2);
    consistent << 0.8, 0.6;
    const InversionReport agree = dictionary_inverse(dict, {0, 1}, consistent);
    REQUIRE_THAT(agree.times(0), WithinAbs(2.0, 1e-12));
    REQUIRE_THAT(agree.times(1), WithinAbs(2.0, 1e-12));
    REQUIRE_THAT(agree.max_disagreement, WithinAbs(0.0, 1e-12));

    Vector skewed(2);
    skewed << 0.8, 0.7;
    const InversionReport disagree = dictionary_inverse(dict, {0, 1}, skewed);
    REQUIRE_THAT(disagree.max_disagreement, WithinAbs(0.5, 1e-12));

    Vector single(1);
    single << 0.5;
    REQUIRE(dictionary_inverse(dict, {1}, single).max_disagreement == 0.0);

    Vector bad(2);
    bad << 0.5, 1.5;
    REQUIRE_THROWS_WITH(dictionary_inverse(dict, {0, 1}, bad), ContainsSubstring("atom 1"));
    REQUIRE_THROWS_AS(dictionary_inverse(dict, {0, 1}, single), ShapeMismatch);
    REQUIRE_THROWS_AS(dictionary_inverse(dict, {5}, single), ValidationError);
}
