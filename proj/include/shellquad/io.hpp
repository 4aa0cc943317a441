#pragma once

// JSON and CSV forms of configurations, test-function sequences, connected
// terms, LSZ state files, estimates and shell tables.

#include <charconv>
#include <complex>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "shellquad/algebra.hpp"
#include "shellquad/config.hpp"
#include "shellquad/kinematics.hpp"
#include "shellquad/quadrature.hpp"
#include "shellquad/vev.hpp"

namespace shellquad {

using json = nlohmann::json;

// Malformed or schema-violating input documents.
struct SchemaError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// Keys are sorted by nlohmann::json, so dump() is canonical.
inline std::string canonical_hash(const json& j) {
  char buf[17];
  auto [end, ec] = std::to_chars(buf, buf + 16, fnv1a(j.dump()), 16);
  std::string hex(buf, end);
  return std::string(16 - hex.size(), '0') + hex;
}

inline std::string shortest(double x) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

inline json complex_to_json(cplx z) { return json{{"re", z.real()}, {"im", z.imag()}}; }

inline cplx complex_from_json(const json& j, const char* what) {
  if (j.is_number()) return j.get<double>();
  if (j.is_object() && j.contains("re")) {
    if (!j.at("re").is_number() || (j.contains("im") && !j.at("im").is_number()))
      throw SchemaError(std::string(what) + ": re/im must be numbers");
    return {j.at("re").get<double>(), j.value("im", 0.0)};
  }
  throw SchemaError(std::string(what) + ": expected a number or {re, im}");
}

namespace detail {

template <class T>
T require(const json& j, const char* key, const char* context) {
  if (!j.is_object() || !j.contains(key)) throw SchemaError(std::string(context) + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw SchemaError(std::string(context) + ": field '" + key + "' has the wrong type");
  }
}

inline void check_schema(const json& j, const char* expected) {
  if (!j.is_object()) throw SchemaError("document must be a JSON object");
  if (j.contains("schema") && j.at("schema") != expected)
    throw SchemaError(std::string("unsupported schema (expected ") + expected + ")");
}

}  // namespace detail

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError("invalid JSON in " + path + ": " + e.what());
  }
}

// ---- kinematics

inline json to_json(const ShellConfig& c) { return json{{"n", c.n}, {"d", c.d}, {"k", c.k}, {"masses", c.masses}}; }

inline ShellConfig shell_config_from_json(const json& j) {
  ShellConfig c{detail::require<int>(j, "n", "config"), detail::require<int>(j, "d", "config"),
                detail::require<int>(j, "k", "config"), detail::require<std::vector<double>>(j, "masses", "config")};
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw SchemaError(e.what());
  } catch (const std::domain_error& e) {
    throw SchemaError(e.what());
  }
  return c;
}

inline json to_json(const ShellConfig& c, const MomentumConfig& p) {
  json j = to_json(c);
  j["momenta"] = p.to_nested();
  return j;
}

inline MomentumConfig momenta_from_json(const json& j, const ShellConfig& c) {
  const auto nested = detail::require<std::vector<std::vector<double>>>(j, "momenta", "config");
  if (static_cast<int>(nested.size()) != c.n) throw SchemaError("config: momenta need one vector per leg");
  for (const auto& p : nested)
    if (static_cast<int>(p.size()) != c.spatial_dim()) throw SchemaError("config: momenta must have d-1 components");
  return MomentumConfig(nested);
}

// ---- algebra

inline json to_json(const LegFactor& leg) {
  json poly = json::array();
  for (const auto& m : leg.f.poly) poly.push_back(json::array({m.exponents, m.coeff}));
  json j{{"center", leg.f.center}, {"sigma", leg.f.sigma}, {"poly", poly}};
  j["emult"] = leg.emult ? json{{"beta_g", leg.emult->beta_g}} : json(nullptr);
  j["lsz"] = leg.lsz ? json{{"mass", leg.lsz->mass}, {"t", leg.lsz->t}} : json(nullptr);
  j["cutoffs"] = leg.cutoffs;
  return j;
}

inline LegFunction leg_function_from_json(const json& j) {
  LegFunction f;
  f.center = detail::require<std::vector<double>>(j, "center", "leg");
  f.sigma = detail::require<double>(j, "sigma", "leg");
  if (j.contains("poly") && !j.at("poly").is_null()) {
    if (!j.at("poly").is_array()) throw SchemaError("leg: poly must be an array");
    for (const auto& m : j.at("poly")) {
      if (!m.is_array() || m.size() != 2 || !m[0].is_array() || !m[1].is_number())
        throw SchemaError("leg: poly entries must be [[exponents], coeff]");
      f.poly.push_back({m[0].get<std::vector<int>>(), m[1].get<double>()});
    }
  }
  try {
    f.validate();
  } catch (const std::exception& e) {
    throw SchemaError(e.what());
  }
  return f;
}

inline LegFactor leg_from_json(const json& j) {
  LegFactor leg{leg_function_from_json(j), std::nullopt, std::nullopt, {}};
  if (j.contains("emult") && !j.at("emult").is_null())
    leg.emult = EnergyMultiplier{detail::require<double>(j.at("emult"), "beta_g", "emult")};
  if (j.contains("lsz") && !j.at("lsz").is_null())
    leg.lsz = LszFactor{detail::require<double>(j.at("lsz"), "mass", "lsz"), detail::require<double>(j.at("lsz"), "t", "lsz")};
  if (j.contains("cutoffs")) leg.cutoffs = detail::require<std::vector<double>>(j, "cutoffs", "leg");
  if (leg.emult && !(leg.emult->beta_g > 0.0)) throw SchemaError("emult: beta_g must be positive");
  for (double b : leg.cutoffs)
    if (!(b > 0.0)) throw SchemaError("leg: cutoffs must be positive");
  return leg;
}

inline json to_json(const TestFunctionSequence& seq) {
  json terms = json::array();
  for (const auto& [n, list] : seq.components())
    for (const auto& term : list) {
      json legs = json::array();
      for (const auto& leg : term.legs) legs.push_back(to_json(leg));
      terms.push_back(json{{"coeff", complex_to_json(term.coeff)}, {"legs", legs}});
    }
  return json{{"schema", kSequenceSchema}, {"d", seq.d()}, {"scalar", complex_to_json(seq.scalar())}, {"terms", terms}};
}

inline TestFunctionSequence sequence_from_json(const json& j) {
  detail::check_schema(j, kSequenceSchema);
  const int d = detail::require<int>(j, "d", "sequence");
  if (d < 3) throw SchemaError("sequence: d must be >= 3");
  TestFunctionSequence seq(d, j.contains("scalar") ? complex_from_json(j.at("scalar"), "scalar") : cplx{});
  if (!j.contains("terms") || !j.at("terms").is_array()) throw SchemaError("sequence: 'terms' must be an array");
  for (const auto& t : j.at("terms")) {
    Term term;
    term.coeff = t.contains("coeff") ? complex_from_json(t.at("coeff"), "coeff") : cplx{1.0};
    if (!t.contains("legs") || !t.at("legs").is_array()) throw SchemaError("term: 'legs' must be an array");
    for (const auto& leg : t.at("legs")) term.legs.push_back(leg_from_json(leg));
    try {
      seq.add_term(std::move(term));
    } catch (const DimensionMismatch& e) {
      throw SchemaError(e.what());
    }
  }
  return seq;
}

inline json to_json(const CutoffProfile& c) { return json{{"betas", c.betas}, {"fallback", c.fallback}}; }

inline CutoffProfile cutoff_from_json(const json& j) {
  CutoffProfile c;
  if (j.contains("betas")) c.betas = detail::require<std::vector<double>>(j, "betas", "cutoff");
  if (j.contains("fallback")) c.fallback = detail::require<double>(j, "fallback", "cutoff");
  try {
    c.validate();
  } catch (const std::exception& e) {
    throw SchemaError(e.what());
  }
  return c;
}

// ---- vev

inline std::string pattern_string(std::span<const ShellSign> pattern) {
  std::string s;
  for (auto x : pattern) s += x == ShellSign::Minus ? '-' : '+';
  return s;
}

inline SignConvention convention_from_string(const std::string& s) {
  if (s == "reflect-minus") return SignConvention::ReflectMinus;
  if (s == "literal") return SignConvention::Literal;
  throw SchemaError("unknown sign convention '" + s + "'");
}

struct TermInput {
  ConnectedTerm term;
  std::optional<CutoffProfile> cutoff = CutoffProfile::uniform(1.0);
};

inline json to_json(const TermInput& input) {
  const auto& t = input.term;
  json j{{"schema", kTermSchema},
         {"n", t.n},
         {"pattern", pattern_string(t.pattern)},
         {"masses", t.leg_masses()},
         {"c_n", complex_to_json(t.c_n)},
         {"upsilon", complex_to_json(t.upsilon)},
         {"beta_b", complex_to_json(t.beta_b)},
         {"two_pi_d", t.include_two_pi_d},
         {"convention", to_string(t.convention)}};
  j["cutoff"] = input.cutoff ? to_json(*input.cutoff) : json(nullptr);
  return j;
}

// Pattern: a string of '-' / '+' (delta^- / delta^+), one per leg; absent
// means the first n/2 legs (rounded down) on delta^- shells.
inline TermInput term_from_json(const json& j) {
  detail::check_schema(j, kTermSchema);
  TermInput input;
  const int n = detail::require<int>(j, "n", "term");
  if (n < 1) throw SchemaError("term: n must be positive");
  input.term = ConnectedTerm::standard(n);
  if (j.contains("pattern")) {
    const auto s = detail::require<std::string>(j, "pattern", "term");
    if (static_cast<int>(s.size()) != n) throw SchemaError("term: pattern must have n characters");
    input.term.pattern.clear();
    for (char c : s) {
      if (c != '-' && c != '+') throw SchemaError("term: pattern characters must be '-' or '+'");
      input.term.pattern.push_back(c == '-' ? ShellSign::Minus : ShellSign::Plus);
    }
  }
  if (j.contains("masses")) input.term.masses = detail::require<std::vector<double>>(j, "masses", "term");
  if (j.contains("c_n")) input.term.c_n = complex_from_json(j.at("c_n"), "c_n");
  if (j.contains("upsilon")) input.term.upsilon = complex_from_json(j.at("upsilon"), "upsilon");
  if (j.contains("beta_b")) input.term.beta_b = complex_from_json(j.at("beta_b"), "beta_b");
  if (j.contains("two_pi_d")) input.term.include_two_pi_d = detail::require<bool>(j, "two_pi_d", "term");
  if (j.contains("convention"))
    input.term.convention = convention_from_string(detail::require<std::string>(j, "convention", "term"));
  if (j.contains("cutoff")) input.cutoff = j.at("cutoff").is_null() ? std::nullopt : std::optional(cutoff_from_json(j.at("cutoff")));
  try {
    input.term.validate();
  } catch (const std::exception& e) {
    throw SchemaError(e.what());
  }
  return input;
}

inline json to_json(const LszInput& s) {
  json poly = json::array();
  for (const auto& m : s.f.poly) poly.push_back(json::array({m.exponents, m.coeff}));
  return json{{"center", s.f.center}, {"sigma", s.f.sigma}, {"poly", poly}, {"mass", s.mass}, {"t", s.t}};
}

inline LszInput lsz_input_from_json(const json& j) {
  LszInput s{leg_function_from_json(j), 0.0, 0.0};
  if (j.contains("mass")) s.mass = detail::require<double>(j, "mass", "state");
  if (j.contains("t")) s.t = detail::require<double>(j, "t", "state");
  if (!(s.mass >= 0.0)) throw SchemaError("state: mass must be >= 0");
  return s;
}

// {schema, in: [state, state], out: [state, state], upsilon, c4, beta_b,
//  two_pi_d, convention, cutoff}
inline AmplitudeRequest states_from_json(const json& j) {
  detail::check_schema(j, kStatesSchema);
  AmplitudeRequest req;
  for (const char* side : {"in", "out"}) {
    if (!j.contains(side) || !j.at(side).is_array()) throw SchemaError(std::string("states: '") + side + "' must be an array");
    auto& list = std::string(side) == "in" ? req.in_states : req.out_states;
    for (const auto& s : j.at(side)) list.push_back(lsz_input_from_json(s));
    if (list.size() != 2) throw SchemaError(std::string("states: '") + side + "' needs exactly 2 states");
  }
  const int dim = req.in_states[0].f.dim();
  for (const auto* list : {&req.in_states, &req.out_states})
    for (const auto& s : *list)
      if (s.f.dim() != dim || dim < 2) throw SchemaError("states: all centers must have the same length d-1 >= 2");
  if (j.contains("upsilon")) req.upsilon = complex_from_json(j.at("upsilon"), "upsilon");
  if (j.contains("c4")) req.c4 = complex_from_json(j.at("c4"), "c4");
  if (j.contains("beta_b")) req.beta_b = complex_from_json(j.at("beta_b"), "beta_b");
  if (j.contains("two_pi_d")) req.include_two_pi_d = detail::require<bool>(j, "two_pi_d", "states");
  if (j.contains("convention"))
    req.convention = convention_from_string(detail::require<std::string>(j, "convention", "states"));
  if (j.contains("cutoff") && !j.at("cutoff").is_null()) req.cutoff = cutoff_from_json(j.at("cutoff"));
  return req;
}

inline json states_to_json(const AmplitudeRequest& req) {
  json in = json::array(), out = json::array();
  for (const auto& s : req.in_states) in.push_back(to_json(s));
  for (const auto& s : req.out_states) out.push_back(to_json(s));
  json j{{"schema", kStatesSchema},
         {"in", in},
         {"out", out},
         {"upsilon", complex_to_json(req.upsilon)},
         {"c4", complex_to_json(req.c4)},
         {"beta_b", complex_to_json(req.beta_b)},
         {"two_pi_d", req.include_two_pi_d},
         {"convention", to_string(req.convention)}};
  j["cutoff"] = req.cutoff ? to_json(*req.cutoff) : json(nullptr);
  return j;
}

// ---- results

inline json to_json(const QuadratureEstimate& est, const std::string& config_hash) {
  json j{{"value", complex_to_json(est.value)},
         {"stderr", est.std_error},
         {"samples", est.samples},
         {"seed", est.seed},
         {"config_hash", config_hash},
         {"excluded_radius", est.excluded_radius}};
  j["flags"] = json::array();
  if (est.no_support) j["flags"].push_back("no-support");
  if (est.structural_zero) j["flags"].push_back("structural-zero");
  return j;
}

inline const char* kShellCsvHeader = "level,R_lo,R_hi,integral,stderr";

inline std::string shells_csv(const AnnulusScan& scan) {
  std::ostringstream out;
  out << kShellCsvHeader << '\n';
  for (const auto& s : scan.shells)
    out << s.level << ',' << shortest(s.r_lo) << ',' << shortest(s.r_hi) << ',' << shortest(s.integral) << ','
        << shortest(s.std_error) << '\n';
  return out.str();
}

inline json to_json(const AnnulusScan& scan, const ExponentFit& fit) {
  json shells = json::array();
  for (const auto& s : scan.shells)
    shells.push_back(json{{"level", s.level},
                          {"R_lo", s.r_lo},
                          {"R_hi", s.r_hi},
                          {"integral", s.integral},
                          {"stderr", s.std_error},
                          {"samples", s.samples}});
  auto num = [](double x) { return std::isfinite(x) ? json(x) : json(nullptr); };
  json ratios = json::array();
  for (double r : fit.ratios) ratios.push_back(num(r));
  return json{{"eps", scan.eps},
              {"levels", scan.levels},
              {"resolution", to_string(scan.resolution)},
              {"ray", {{"direction", scan.ray.direction}, {"energies", scan.ray.energies}}},
              {"shells", shells},
              {"exponent", num(fit.exponent)},
              {"exponent_stderr", num(fit.std_error)},
              {"ratios", ratios},
              {"verdict", to_string(fit.verdict)},
              {"reason", fit.reason}};
}

}  // namespace shellquad
