#include <doctest.h>

#include <cmath>

#include "flexrl/equivalence.hpp"
#include "support/oracles.hpp"

using namespace flexrl;

TEST_CASE("reference losses: spot values") {
  CHECK(reference_loss(ReferenceLoss::xql(), 0.0) == 0.0);
  CHECK(reference_loss(ReferenceLoss::xql(), 1.0) ==
        doctest::Approx(std::exp(1.0) - 2.0).epsilon(1e-15));
  CHECK(reference_loss(ReferenceLoss::iql(0.7), -1.0) == doctest::Approx(0.15));
  CHECK(reference_loss(ReferenceLoss::iql(0.7), 1.0) == doctest::Approx(0.35));
  CHECK(reference_loss(ReferenceLoss::mse(), 3.0) == doctest::Approx(4.5));
  CHECK_THROWS_AS(ReferenceLoss::iql(1.0), ConfigError);
}

TEST_CASE("reference losses are convex with minimum 0 at 0") {
  for (const ReferenceLoss& ref :
       {ReferenceLoss::xql(), ReferenceLoss::iql(0.3), ReferenceLoss::mse()}) {
    auto f = [&](double e) { return reference_loss(ref, e); };
    CHECK(f(0.0) == 0.0);
    for (int i = 0; i <= 100; ++i) {
      double e = -2.0 + 4.0 * i / 100.0;
      CHECK(f(e) >= 0.0);
      CHECK(test::second_diff(f, e, 1e-4) >= -1e-6);
    }
    CHECK(std::fabs(test::golden_min(f, -2.0, 2.0)) <= 1e-6);
  }
}

TEST_CASE("flexible losses reproduce the reference algorithms exactly") {
  CHECK(verify_equivalence(ReferenceLoss::xql(), preset("xql"), -2.0, 2.0, 401) <= 1e-10);
  for (double tau : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    CAPTURE(tau);
    CHECK(verify_equivalence(ReferenceLoss::iql(tau), preset_iql(tau), -3.0, 3.0, 601) <=
          1e-10);
  }
  CHECK(verify_equivalence(ReferenceLoss::mse(), FlexF::from_base(DivergenceFn::chi2()),
                           -5.0, 5.0, 801) <= 1e-12);
}

TEST_CASE("verify_equivalence rejects grids outside the conjugate domain") {
  FlexF porel = preset_porel_dice(0.5);
  // g_plus = chi2 keeps the upper side unbounded, so this passes.
  CHECK(verify_equivalence(ReferenceLoss::mse(), porel, -0.1, 0.1, 11) >= 0.0);
  // A pure Le-Cam composition is capped at 1/4.
  FlexF lecam = FlexF::from_base(DivergenceFn::le_cam());
  CHECK_THROWS_AS(verify_equivalence(ReferenceLoss::mse(), lecam, -1.0, 1.0, 11),
                  DomainError);
}
