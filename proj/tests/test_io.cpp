#include <gtest/gtest.h>

#include <string>

#include "shellquad/io.hpp"

using namespace shellquad;

namespace {

TestFunctionSequence sample_sequence() {
  LegFactor a{LegFunction{{0.1, 0.2, 0.3}, 0.7, {{{1, 0, 2}, 0.25}, {{0, 0, 0}, 1.0}}}, EnergyMultiplier{2.0},
              std::nullopt, {1.0, 3.0}};
  LegFactor b{LegFunction{{-1.0, 0.0, 1e-17}, 1.1, {}}, std::nullopt, LszFactor{0.5, -2.0}, {}};
  TestFunctionSequence seq(4, cplx(0.5, -0.25));
  seq.add_term(Term{cplx(1.0, 2.0), {a, b}});
  seq.add_term(Term{cplx(-0.3, 0.0), {b}});
  return seq;
}

}  // namespace

TEST(Json, SequenceRoundTrip) {
  const auto seq = sample_sequence();
  const json j = to_json(seq);
  const auto back = sequence_from_json(json::parse(j.dump()));
  EXPECT_EQ(back.d(), 4);
  EXPECT_EQ(back.scalar(), seq.scalar());
  EXPECT_EQ(back.components(), seq.components());
  EXPECT_EQ(to_json(back), j);
}

TEST(Json, TermRoundTripAndDefaults) {
  TermInput input;
  input.term = ConnectedTerm::standard(4);
  input.term.pattern = {ShellSign::Plus, ShellSign::Minus, ShellSign::Minus, ShellSign::Plus};
  input.term.masses = {0.0, 1.0, 0.0, 2.5};
  input.term.c_n = cplx(0.0, 1.0);
  input.term.convention = SignConvention::Literal;
  input.cutoff = std::nullopt;
  const auto back = term_from_json(json::parse(to_json(input).dump()));
  EXPECT_EQ(to_json(back), to_json(input));
  EXPECT_EQ(pattern_string(back.term.pattern), "+--+");
  EXPECT_FALSE(back.cutoff.has_value());

  const auto minimal = term_from_json(json{{"n", 6}});
  EXPECT_EQ(pattern_string(minimal.term.pattern), "---+++");
  ASSERT_TRUE(minimal.cutoff.has_value());
  EXPECT_EQ(minimal.cutoff->fallback, 1.0);
  EXPECT_EQ(minimal.term.convention, SignConvention::ReflectMinus);
}

TEST(Json, StatesRoundTrip) {
  AmplitudeRequest req;
  req.in_states = {{LegFunction{{1, 0, 0}, 0.5, {}}, 0.0, 0.0}, {LegFunction{{-1, 0, 0}, 0.5, {}}, 0.2, 1.5}};
  req.out_states = {{LegFunction{{0, 1, 0}, 0.5, {}}, 0.0, 0.0}, {LegFunction{{0, -1, 0}, 0.4, {}}, 0.0, 0.0}};
  req.upsilon = cplx(2.0, 1.0);
  req.cutoff = CutoffProfile::uniform(0.8);
  const json j = states_to_json(req);
  EXPECT_EQ(states_to_json(states_from_json(json::parse(j.dump()))), j);
}

TEST(Json, ShellConfigAndMomenta) {
  const ShellConfig c{3, 4, 1, {0.0, 1.0, 2.0}};
  const MomentumConfig p({{1, 2, 3}, {-1, 0, 0}, {0, -2, -3}});
  const json j = to_json(c, p);
  const ShellConfig c2 = shell_config_from_json(j);
  EXPECT_EQ(c2.masses, c.masses);
  EXPECT_EQ(momenta_from_json(j, c2).to_nested(), p.to_nested());
  json bad = j;
  bad["k"] = 7;
  EXPECT_THROW(shell_config_from_json(bad), SchemaError);
  bad = j;
  bad["momenta"][0] = json::array({1, 2});
  EXPECT_THROW(momenta_from_json(bad, c2), SchemaError);
}

TEST(Json, SchemaErrors) {
  const json seq = to_json(sample_sequence());
  json bad = seq;
  bad["schema"] = "shellquad.sequence/9";
  EXPECT_THROW(sequence_from_json(bad), SchemaError);
  bad = seq;
  bad.erase("d");
  EXPECT_THROW(sequence_from_json(bad), SchemaError);
  bad = seq;
  bad["terms"][0]["legs"][0]["sigma"] = -1.0;
  EXPECT_THROW(sequence_from_json(bad), SchemaError);
  bad = seq;
  bad["terms"][0]["legs"][0]["center"] = json::array({0.0, 0.0});
  EXPECT_THROW(sequence_from_json(bad), SchemaError);
  bad = seq;
  bad["terms"][0]["legs"][0]["poly"] = json::array({json::array({1, 2})});
  EXPECT_THROW(sequence_from_json(bad), SchemaError);
  bad = seq;
  bad["terms"][0]["coeff"] = "one";
  EXPECT_THROW(sequence_from_json(bad), SchemaError);

  EXPECT_THROW(term_from_json(json{{"n", 4}, {"pattern", "--+"}}), SchemaError);
  EXPECT_THROW(term_from_json(json{{"n", 4}, {"pattern", "--+x"}}), SchemaError);
  EXPECT_THROW(term_from_json(json{{"n", 4}, {"convention", "mirror"}}), SchemaError);
  EXPECT_THROW(term_from_json(json{{"n", 4}, {"masses", {0, 0}}}), SchemaError);
  EXPECT_THROW(term_from_json(json{{"n", 4}, {"cutoff", {{"fallback", 0.0}}}}), SchemaError);
  EXPECT_THROW(term_from_json(json::array()), SchemaError);

  const json state{{"center", {1, 0, 0}}, {"sigma", 0.5}};
  EXPECT_THROW(states_from_json(json{{"in", {state}}, {"out", {state, state}}}), SchemaError);
  EXPECT_THROW(states_from_json(json{{"in", {state, state}}}), SchemaError);
  json short_state = state;
  short_state["center"] = json::array({1, 0});
  EXPECT_THROW(states_from_json(json{{"in", {state, short_state}}, {"out", {state, state}}}), SchemaError);
  EXPECT_THROW(read_json_file("/nonexistent/shellquad.json"), SchemaError);
}

TEST(Json, ComplexNumbers) {
  EXPECT_EQ(complex_from_json(json(2.5), "x"), cplx(2.5, 0.0));
  EXPECT_EQ(complex_from_json(json{{"re", 1.0}, {"im", -2.0}}, "x"), cplx(1.0, -2.0));
  EXPECT_EQ(complex_from_json(json{{"re", 1.0}}, "x"), cplx(1.0, 0.0));
  EXPECT_THROW(complex_from_json(json("1+2i"), "x"), SchemaError);
  EXPECT_THROW(complex_from_json(json{{"re", "1"}}, "x"), SchemaError);
}

TEST(Hash, IndependentOfKeyOrder) {
  const json a = json::parse(R"({"b": 1, "a": [1, 2, {"y": 0.5, "x": true}]})");
  const json b = json::parse(R"({"a": [1, 2, {"x": true, "y": 0.5}], "b": 1})");
  EXPECT_EQ(canonical_hash(a), canonical_hash(b));
  EXPECT_EQ(canonical_hash(a).size(), 16u);
  EXPECT_NE(canonical_hash(a), canonical_hash(json::parse(R"({"a": [2, 1, {"x": true, "y": 0.5}], "b": 1})")));
}

TEST(Hash, Fnv1aReferenceValues) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cull);
  EXPECT_EQ(fnv1a("foobar"), 0x85944171f73967e8ull);
}

TEST(Report, ShellCsv) {
  AnnulusScan scan;
  scan.eps = 0.05;
  scan.levels = 2;
  scan.shells = {{0, 0.025, 0.05, 1.5e-3, 2e-5, 100}, {1, 0.0125, 0.025, 3.75e-4, 1e-5, 100}};
  EXPECT_EQ(shells_csv(scan), "level,R_lo,R_hi,integral,stderr\n0,0.025,0.05,0.0015,2e-05\n1,0.0125,0.025,0.000375,1e-05\n");
}

TEST(Report, EstimateFlags) {
  QuadratureEstimate est;
  est.structural_zero = true;
  const json j = to_json(est, "abc");
  EXPECT_EQ(j.at("flags"), json::array({"structural-zero"}));
  EXPECT_EQ(j.at("value"), (json{{"re", 0.0}, {"im", 0.0}}));
  EXPECT_EQ(j.at("config_hash"), "abc");
}

TEST(Report, NonFiniteFitFieldsBecomeNull) {
  AnnulusScan scan;
  ExponentFit fit;
  fit.ratios = {std::numeric_limits<double>::quiet_NaN()};
  const json j = to_json(scan, fit);
  EXPECT_TRUE(j.at("exponent").is_null());
  EXPECT_TRUE(j.at("ratios")[0].is_null());
  EXPECT_EQ(j.at("verdict"), "inconclusive");
}
