#include <doctest.h>

#include <cmath>

#include "flexrl/adaptive.hpp"

using namespace flexrl;

namespace {

std::vector<Transition> pairs(std::initializer_list<std::pair<int, int>> sa) {
  std::vector<Transition> out;
  for (auto [s, a] : sa) out.push_back({s, a, 0.0, 0, false});
  return out;
}

}  // namespace

TEST_CASE("bc_update: single action, deterministic data, empty batch") {
  AdaptiveState st = AdaptiveState::make(1, 1);
  bc_update(st, pairs({{0, 0}}));
  CHECK(st.bc_prob(0, 0) == doctest::Approx(1.0));

  // Deterministic behavior: argmax matches after enough steps.
  AdaptiveState st2 = AdaptiveState::make(2, 3);
  st2.lr_bc = 0.5;
  auto batch = pairs({{0, 2}, {1, 1}, {0, 2}, {1, 1}});
  for (int k = 0; k < 500; ++k) bc_update(st2, batch);
  CHECK(st2.bc_prob(0, 2) > 0.9);
  CHECK(st2.bc_prob(1, 1) > 0.9);

  AdaptiveState before = st2;
  bc_update(st2, {});
  CHECK(st2.bc_logits == before.bc_logits);
}

TEST_CASE("estimate_alphas closed forms and clamping") {
  // Construct a two-sample batch whose cosine is exactly 0.5: u = (1, 0)
  // needs a zero bc probability, unreachable through softmax; instead use
  // orthogonal-ish weights via the e_hat side: v = (exp(c), exp(c)) and
  // u = (p, q): cos = (p+q)/(sqrt(p^2+q^2) sqrt(2)). With p = q the cosine is
  // 1; to hit 0.5 solve q/p from (1+x)/sqrt(2(1+x^2)) = 0.5 -> x^2+... use
  // x = tan(75deg) numerically instead; simpler: drive the EMA directly.
  AdaptiveState st = AdaptiveState::make(1, 2);
  st.ema_decay = 0.0;

  // Raw cosine for a parallel pair is 1; the clamp caps it at 1 - iota_b.
  auto batch = pairs({{0, 0}, {0, 1}});
  std::vector<double> e_hat = {0.1, 0.1};  // exp equal -> v parallel to u (u uniform)
  estimate_alphas(st, batch, e_hat);
  CHECK(st.ema_cos == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(st.alpha_plus == doctest::Approx(1.0 / 0.7));
  CHECK(st.alpha_minus == doctest::Approx(1.0 / 0.3));
  CHECK(st.alpha_plus * std::min(std::max(st.ema_cos, 0.3), 0.7) == doctest::Approx(1.0));

  // cos = 0.5 -> both alphas 2 (pre-EMA). Set the EMA directly and re-derive.
  AdaptiveState st2 = AdaptiveState::make(1, 2);
  st2.ema_decay = 0.0;
  // Build a batch with known cosine 0.5: u = (0.5, 0.5) after softmax(0,0);
  // choose v = (v1, v2) with (u.v)/(|u||v|) = 0.5 -> v2/v1 solves
  // (1+x)/(sqrt(2)sqrt(1+x^2)) = 0.5 -> x = -2 +- sqrt(3) ... take
  // x = tan(105 deg) < 0, impossible for exp. Instead check the formula at
  // the clamp-free cosine actually produced and assert the identities.
  std::vector<double> e2 = {0.15, -0.2};
  estimate_alphas(st2, batch, e2);
  double c = std::min(std::max(st2.ema_cos, 0.3), 0.7);
  CHECK(st2.alpha_plus * c == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(st2.alpha_minus * (1.0 - c) == doctest::Approx(1.0).epsilon(1e-12));

  // Low raw cosine clamps at iota_b: alpha_+ = 1/0.3.
  AdaptiveState st3 = AdaptiveState::make(1, 2);
  st3.ema_decay = 0.0;
  st3.ema_cos = 0.1;  // pretend the EMA landed below the bound
  // A degenerate (empty) update leaves it; apply the clamp via a real update
  // with decay 1 so ema stays 0.1.
  st3.ema_decay = 1.0;
  estimate_alphas(st3, batch, e_hat);
  CHECK(st3.alpha_plus == doctest::Approx(1.0 / 0.3));

  // Degenerate vectors: warning flag, state unchanged.
  AdaptiveState st4 = AdaptiveState::make(1, 2);
  double a_before = st4.alpha_plus;
  estimate_alphas(st4, {}, {});
  CHECK(st4.degenerate_warning);
  CHECK(st4.alpha_plus == a_before);
}

TEST_CASE("EMA obeys its closed-form recursion exactly") {
  AdaptiveState st = AdaptiveState::make(1, 2);
  st.ema_decay = 0.9;
  st.ema_e = 0.5;  // x0
  auto batch = pairs({{0, 0}});
  FlexF flex = preset_iql(0.7);
  std::vector<double> e_hat = {0.1};
  for (int k = 1; k <= 20; ++k) {
    estimate_beta(st, flex, e_hat);
    double expected = 0.1 + (0.5 - 0.1) * std::pow(0.9, k);
    CHECK(st.ema_e == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("estimate_beta closed forms and clipping") {
  FlexF flex = compose_flex(DivergenceFn::chi2(), DivergenceFn::chi2(), 1.0, 1.0, 1.0);

  AdaptiveState st = AdaptiveState::make(1, 2);
  st.ema_decay = 0.0;
  st.alpha_plus = 1.0;
  st.alpha_minus = 1.0;
  std::vector<double> zero = {0.0};
  estimate_beta(st, flex, zero);
  CHECK(st.beta == doctest::Approx(1.0));

  std::vector<double> tenth = {0.1};
  estimate_beta(st, flex, tenth);
  CHECK(st.beta == doctest::Approx(1.1));

  // Samples clip to 0.15 before the mean.
  std::vector<double> wild = {0.3};
  estimate_beta(st, flex, wild);
  CHECK(st.beta == doctest::Approx(1.15));

  // Scale consistency: doubling both alphas halves the inverted argument.
  st.alpha_plus = 2.0;
  st.alpha_minus = 2.0;
  estimate_beta(st, flex, tenth);
  CHECK(st.beta == doctest::Approx(1.05));

  CHECK_THROWS_AS(estimate_beta(st, flex, {}), ShapeError);
}

TEST_CASE("recompose: identity-like defaults and invariant preservation") {
  AdaptiveState st = AdaptiveState::make(1, 2);
  FlexF f = recompose(st, DivergenceFn::kl(), DivergenceFn::chi2());
  CHECK(f.k_g == doctest::Approx(0.0));
  CHECK(f.c_g == doctest::Approx(0.0));
  CHECK(f.beta == doctest::Approx(1.0));

  // Mid-training estimates keep the composition continuous.
  st.alpha_plus = 1.0 / 0.7;
  st.alpha_minus = 1.0 / 0.3;
  st.beta = 0.8;
  FlexF g = recompose(st, DivergenceFn::le_cam(), DivergenceFn::chi2());
  CHECK(std::fabs(g.minus_branch_gstar(g.beta) - g.plus_branch_gstar(g.beta)) <= 1e-9);
  CHECK(std::fabs(g.minus_branch_prime(g.beta) - g.plus_branch_prime(g.beta)) <= 1e-9);
  CHECK(g.corrected_branch_is_minus());

  // Crossing 1 flips which branch carries the correction.
  st.beta = 1.2;
  FlexF h = recompose(st, DivergenceFn::le_cam(), DivergenceFn::chi2());
  CHECK_FALSE(h.corrected_branch_is_minus());
}

TEST_CASE("adaptive loop: estimates stay in the documented ranges") {
  AdaptiveState st = AdaptiveState::make(3, 2);
  auto batch = pairs({{0, 0}, {1, 1}, {2, 0}, {0, 1}});
  FlexF flex = compose_flex(DivergenceFn::le_cam(), DivergenceFn::chi2(), 1.0, 1.0, 1.0);
  Rng rng(3);
  for (int k = 0; k < 200; ++k) {
    std::vector<double> e_hat;
    for (std::size_t i = 0; i < batch.size(); ++i) e_hat.push_back(rng.uniform(-0.5, 0.5));
    bc_update(st, batch);
    estimate_alphas(st, batch, e_hat);
    estimate_beta(st, flex, e_hat);
    flex = recompose(st, DivergenceFn::le_cam(), DivergenceFn::chi2());
    CHECK(st.alpha_plus >= 1.0 / 0.7 - 1e-12);
    CHECK(st.alpha_plus <= 1.0 / 0.3 + 1e-12);
    CHECK(st.alpha_minus >= 1.0 / 0.7 - 1e-12);
    CHECK(st.alpha_minus <= 1.0 / 0.3 + 1e-12);
    CHECK(st.beta > 0.0);
  }
}
