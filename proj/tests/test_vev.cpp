#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "shellquad/rng.hpp"
#include "shellquad/vev.hpp"

using namespace shellquad;

namespace {

LegFactor gaussian_leg(std::vector<double> center, double sigma) {
  return LegFactor{LegFunction{std::move(center), sigma, {}}, std::nullopt, std::nullopt, {}};
}

TestFunctionSequence four_leg_sequence(RandomStream& s, double spread) {
  std::vector<LegFactor> legs;
  for (int j = 0; j < 4; ++j)
    legs.push_back(gaussian_leg({spread * s.normal(), spread * s.normal(), spread * s.normal()}, 0.4 + s.uniform()));
  return TestFunctionSequence::single(4, Term{cplx(1.0 + s.uniform(), s.normal()), legs});
}

TestFunctionSequence balanced_sequence() {
  return TestFunctionSequence::single(4, Term{1.0,
                                              {gaussian_leg({0, 1, 0}, 0.5), gaussian_leg({0, -1, 0}, 0.5),
                                               gaussian_leg({1, 0, 0}, 0.5), gaussian_leg({-1, 0, 0}, 0.5)}});
}

LszInput state(std::vector<double> center, double t = 0.0) { return {LegFunction{std::move(center), 0.5, {}}, 0.0, t}; }

AmplitudeRequest massless_scattering(std::size_t budget) {
  AmplitudeRequest req;
  req.in_states = {state({1, 0, 0}), state({-1, 0, 0})};
  req.out_states = {state({0, 1, 0}), state({0, -1, 0})};
  req.budget = budget;
  req.seed = 3;
  return req;
}

TestFunctionSequence one_leg_function(RandomStream& s, cplx coeff) {
  LegFactor leg = gaussian_leg({s.normal(), s.normal(), s.normal()}, 0.4 + s.uniform());
  if (s.uniform() < 0.5) leg.f.poly = {{{1, 0, 2}, s.normal()}, {{0, 0, 0}, 1.0}};
  return one_leg(4, leg, coeff);
}

}  // namespace

TEST(ConnectedTerm, StructuralZerosSkipSampling) {
  const auto seq = balanced_sequence();
  ConnectedTerm odd = ConnectedTerm::standard(5);
  const auto a = tn_eval(odd, seq, std::nullopt, {100000, 1, 1});
  EXPECT_TRUE(a.structural_zero);
  EXPECT_EQ(a.samples, 0u);
  EXPECT_EQ(a.value, cplx(0.0));
  EXPECT_EQ(*structural_zero_reason(odd), "odd n");

  ConnectedTerm deficient = ConnectedTerm::standard(4);
  deficient.pattern = {ShellSign::Minus, ShellSign::Plus, ShellSign::Plus, ShellSign::Plus};
  const auto b = tn_eval(deficient, seq, std::nullopt, {100000, 1, 1});
  EXPECT_TRUE(b.structural_zero);
  EXPECT_EQ(b.samples, 0u);
  EXPECT_EQ(b.value, cplx(0.0));
  deficient.pattern = {ShellSign::Minus, ShellSign::Minus, ShellSign::Minus, ShellSign::Plus};
  EXPECT_TRUE(structural_zero_reason(deficient).has_value());
  EXPECT_FALSE(structural_zero_reason(ConnectedTerm::standard(6)).has_value());
}

TEST(ConnectedTerm, MissingComponentIsAPrecondition) {
  EXPECT_THROW(tn_eval(ConnectedTerm::standard(6), balanced_sequence(), std::nullopt, {1000, 1, 1}),
               PreconditionError);
}

TEST(ConnectedTerm, LinearInConstants) {
  const auto seq = balanced_sequence();
  const TnOptions opt{10000, 2, 1};
  ConnectedTerm term = ConnectedTerm::standard(4);
  const cplx base = tn_eval(term, seq, CutoffProfile::uniform(1.0), opt).value;
  term.c_n = cplx(2.5, -1.0);
  term.upsilon = 3.0;
  const cplx scaled_value = tn_eval(term, seq, CutoffProfile::uniform(1.0), opt).value;
  EXPECT_LT(std::abs(scaled_value - cplx(7.5, -3.0) * base), 1e-13 * std::abs(scaled_value));
  term.upsilon = 0.0;
  EXPECT_EQ(tn_eval(term, seq, CutoffProfile::uniform(1.0), opt).value, cplx(0.0));
}

TEST(ConnectedTerm, TwoPiFactorIsOptional) {
  const auto seq = balanced_sequence();
  ConnectedTerm term = ConnectedTerm::standard(4);
  const cplx with = tn_eval(term, seq, std::nullopt, {5000, 2, 1}).value;
  term.include_two_pi_d = false;
  const cplx without = tn_eval(term, seq, std::nullopt, {5000, 2, 1}).value;
  EXPECT_NEAR(std::abs(with / without), std::pow(2.0 * std::numbers::pi, 4), 1e-9);
}

TEST(ConnectedTerm, StableUnderLargerBudget) {
  const auto seq = balanced_sequence();
  const auto term = ConnectedTerm::standard(4);
  const auto small = tn_eval(term, seq, CutoffProfile::uniform(1.0), {50000, 4, 0});
  const auto large = tn_eval(term, seq, CutoffProfile::uniform(1.0), {200000, 5, 0});
  EXPECT_LT(std::abs(small.value - large.value), 0.05 * std::abs(large.value));
}

TEST(ConnectedTerm, MasslessCorpusIsFinite) {
  RandomStream s(12, 1, 0);
  for (int i = 0; i < 20; ++i) {
    const auto seq = four_leg_sequence(s, 1.0);
    const auto est = tn_eval(ConnectedTerm::standard(4), seq, CutoffProfile::uniform(0.5 + s.uniform()),
                             {4000, static_cast<std::uint64_t>(i), 0});
    EXPECT_TRUE(std::isfinite(est.value.real()) && std::isfinite(est.value.imag())) << "case " << i;
    EXPECT_TRUE(std::isfinite(est.std_error)) << "case " << i;
    EXPECT_EQ(est.samples, 4000u);
  }
}

TEST(TwoPoint, PositiveOnDiagonal) {
  RandomStream s(13, 1, 0);
  for (int i = 0; i < 100; ++i) {
    const auto f = one_leg_function(s, cplx(s.normal(), s.normal()));
    const double mass = i % 2 == 0 ? 0.0 : s.uniform();
    const cplx v = free_two_point(f, f, mass, {8, 8, 12, 24});
    EXPECT_GT(v.real(), 0.0) << "case " << i;
    EXPECT_LT(std::abs(v.imag()), 1e-12 * v.real());
  }
}

TEST(TwoPoint, ZeroAndSesquilinear) {
  RandomStream s(14, 1, 0);
  const auto f = one_leg_function(s, 1.0);
  const auto g = one_leg_function(s, 1.0);
  const auto h = one_leg_function(s, 1.0);
  EXPECT_EQ(free_two_point(f, TestFunctionSequence::zero(4), 0.0), cplx(0.0));
  const cplx a(0.5, 2.0), b(-1.0, 0.3);
  const cplx combo = free_two_point(f, sequence_sum(scaled(g, a), scaled(h, b)), 0.3);
  const cplx parts = a * free_two_point(f, g, 0.3) + b * free_two_point(f, h, 0.3);
  EXPECT_LT(std::abs(combo - parts), 1e-8 * std::abs(parts));
  const cplx left = free_two_point(scaled(f, a), g, 0.3);
  EXPECT_LT(std::abs(left - std::conj(a) * free_two_point(f, g, 0.3)), 1e-12 * std::abs(left));
  EXPECT_THROW(free_two_point(f, TestFunctionSequence::zero(3), 0.0), DimensionMismatch);
}

// Oracle: midpoint rule on a Cartesian grid, independent of the spherical rule.
TEST(TwoPoint, MatchesCartesianGrid) {
  const CutoffProfile cut = CutoffProfile::uniform(1.0);
  const std::vector<std::pair<std::vector<double>, double>> specs{
      {{0.5, 0.2, 0.0}, 0.7}, {{-0.3, 0.6, 0.4}, 0.8}, {{1.0, 0.0, -0.5}, 0.6}};
  for (std::size_t a = 0; a < specs.size(); ++a) {
    const std::size_t b = (a + 1) % specs.size();
    const auto f1 = phi_map(one_leg(4, gaussian_leg(specs[a].first, specs[a].second)), cut);
    const auto f2 = phi_map(one_leg(4, gaussian_leg(specs[b].first, specs[b].second)), cut);
    const int cells = 140;
    const double half = 5.0, step = 2.0 * half / cells;
    cplx grid = 0.0;
    MomentumConfig p(1, 3);
    for (int i = 0; i < cells; ++i)
      for (int j = 0; j < cells; ++j)
        for (int k = 0; k < cells; ++k) {
          p[0][0] = -half + (i + 0.5) * step;
          p[0][1] = -half + (j + 0.5) * step;
          p[0][2] = -half + (k + 0.5) * step;
          const double w = vec::norm(p[0]);
          const double e[1] = {w};
          grid += std::conj(eval_component(f1, 1, e, p)) * eval_component(f2, 1, e, p) / (2.0 * w);
        }
    grid *= step * step * step;
    const cplx quad = free_two_point(f1, f2, 0.0);
    EXPECT_LT(std::abs(quad - grid), 1e-3 * std::abs(grid)) << quad << " vs " << grid;
  }
}

TEST(Lsz, StructureOfTheAmplitude) {
  AmplitudeRequest req = massless_scattering(20000);
  const auto base = scalar_4pt_lsz(req);
  EXPECT_TRUE(std::isfinite(base.value.real()));
  EXPECT_GT(std::abs(base.value), 0.0);
  EXPECT_EQ(base.samples, 20000u);

  AmplitudeRequest shifted = req;
  for (auto& s : shifted.in_states) s.t = 2.7;
  for (auto& s : shifted.out_states) s.t = 2.7;
  EXPECT_NEAR(std::abs(scalar_4pt_lsz(shifted).value), std::abs(base.value), 1e-10 * std::abs(base.value));

  AmplitudeRequest tripled = req;
  tripled.upsilon = 3.0;
  EXPECT_LT(std::abs(scalar_4pt_lsz(tripled).value - 3.0 * base.value), 1e-13 * std::abs(base.value));
  tripled.upsilon = 0.0;
  EXPECT_EQ(scalar_4pt_lsz(tripled).value, cplx(0.0));
}

TEST(Lsz, LiteralConventionAnnihilatesOutStates) {
  AmplitudeRequest req = massless_scattering(4000);
  req.convention = SignConvention::Literal;
  EXPECT_EQ(scalar_4pt_lsz(req).value, cplx(0.0));
}

TEST(Lsz, NeedsTwoInAndTwoOut) {
  AmplitudeRequest req = massless_scattering(1000);
  req.in_states.push_back(state({0, 0, 1}));
  EXPECT_THROW(scalar_4pt_lsz(req), DimensionMismatch);
}
