#pragma once

// Connected functions of the constant-B/Upsilon scalar model, the free
// two-point functional and the LSZ 4-point amplitude.

#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "shellquad/algebra.hpp"
#include "shellquad/config.hpp"
#include "shellquad/kinematics.hpp"
#include "shellquad/quadrature.hpp"

namespace shellquad {

// T_n = (2 pi)^d c_n beta_B Upsilon delta(sum p) prod delta^-(p_i) prod delta^+(p_j).
// With all delta^- legs listed before all delta^+ legs the chain of
// alternating factors contains exactly one B factor, so beta_B enters once.
struct ConnectedTerm {
  int n = 4;
  std::vector<ShellSign> pattern;  // one entry per leg
  std::vector<double> masses;      // empty: all massless
  cplx c_n = 1.0;
  cplx upsilon = 1.0;
  cplx beta_b = 1.0;
  bool include_two_pi_d = true;
  SignConvention convention = SignConvention::ReflectMinus;

  static ConnectedTerm standard(int n) {
    ConnectedTerm term;
    term.n = n;
    for (int j = 0; j < n; ++j) term.pattern.push_back(j < n / 2 ? ShellSign::Minus : ShellSign::Plus);
    return term;
  }

  std::vector<double> leg_masses() const { return masses.empty() ? std::vector<double>(n, 0.0) : masses; }

  int count(ShellSign s) const {
    int c = 0;
    for (auto x : pattern) c += x == s;
    return c;
  }

  void validate() const {
    if (n < 1) throw DimensionMismatch("ConnectedTerm: n must be positive");
    if (static_cast<int>(pattern.size()) != n) throw DimensionMismatch("ConnectedTerm: pattern needs n entries");
    if (!masses.empty() && static_cast<int>(masses.size()) != n)
      throw DimensionMismatch("ConnectedTerm: masses need n entries");
    for (double m : masses)
      if (!(m >= 0.0) || !std::isfinite(m)) throw DomainError("ConnectedTerm: masses must be finite and >= 0");
  }
};

// Reason the term vanishes identically, if it does.
inline std::optional<std::string> structural_zero_reason(const ConnectedTerm& term) {
  if (term.n % 2 != 0) return "odd n";
  if (term.count(ShellSign::Minus) < 2) return "fewer than two delta^- legs";
  if (term.count(ShellSign::Plus) < 2) return "fewer than two delta^+ legs";
  return std::nullopt;
}

inline cplx connected_prefactor(const ConnectedTerm& term, int d) {
  cplx factor = term.c_n * term.beta_b * term.upsilon;
  if (term.include_two_pi_d) factor *= std::pow(2.0 * std::numbers::pi, d);
  return factor;
}

struct TnOptions {
  std::size_t budget = defaults::kBudget;
  std::uint64_t seed = 0;
  int threads = 0;
};

// Applies phi (when a cutoff is given), binds the legs to their shells and
// integrates over delta(sum p) delta(P).
inline QuadratureEstimate tn_eval(const ConnectedTerm& term, const TestFunctionSequence& seq,
                                  const std::optional<CutoffProfile>& cutoff, const TnOptions& options = {}) {
  term.validate();
  if (structural_zero_reason(term)) {
    QuadratureEstimate est;
    est.seed = options.seed;
    est.structural_zero = true;
    return est;
  }
  if (seq.component(term.n) == nullptr)
    throw PreconditionError("tn_eval: sequence has no " + std::to_string(term.n) + "-leg component");

  const TestFunctionSequence mapped = cutoff ? phi_map(seq, *cutoff) : seq;
  const auto masses = term.leg_masses();
  ShellBinding binding = bind_on_shell(mapped, term.n, term.pattern, masses, term.convention);
  binding.functional.normalization = 1.0;
  QuadratureEstimate est = eval_delta_functional(binding.functional, {options.budget, options.seed, options.threads});
  const cplx factor = connected_prefactor(term, seq.d());
  est.value *= factor;
  est.std_error *= std::abs(factor);
  return est;
}

struct TwoPointOptions {
  int radial_panels = 16;
  int radial_nodes = 16;  // Gauss-Legendre nodes per panel
  int polar_nodes = 24;   // per hyperspherical polar angle
  int azimuth_nodes = 48; // trapezoid on the periodic angle
  double envelope_sigmas = 8.0;
};

namespace detail {

struct GaussLegendre {
  std::vector<double> x, w;  // on [-1, 1]
};

inline GaussLegendre gauss_legendre(int order) {
  GaussLegendre rule{std::vector<double>(order), std::vector<double>(order)};
  for (int i = 0; i < order; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 1; j <= order; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
      }
      dp = order * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    rule.x[i] = z;
    rule.w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  return rule;
}

inline double sequence_radius(const TestFunctionSequence& seq, double sigmas) {
  double radius = 0.0;
  if (const auto* terms = seq.component(1))
    for (const auto& t : *terms) radius = std::max(radius, vec::norm(t.legs[0].f.center) + sigmas * t.legs[0].f.sigma);
  return radius;
}

}  // namespace detail

// int d^{d-1}p conj(f1(w, p)) f2(w, p) / (2 w) on the positive mass shell,
// by Gauss-Legendre panels in |p| and a product rule over the sphere.
inline cplx free_two_point(const TestFunctionSequence& f1, const TestFunctionSequence& f2, double mass,
                           const TwoPointOptions& options = {}) {
  check_same_d(f1, f2);
  if (!(mass >= 0.0)) throw DomainError("free_two_point: mass must be >= 0");
  if (f1.component(1) == nullptr || f2.component(1) == nullptr) return 0.0;
  const int dim = f1.d() - 1;
  const double radius = std::min(detail::sequence_radius(f1, options.envelope_sigmas),
                                 detail::sequence_radius(f2, options.envelope_sigmas));
  if (!(radius > 0.0)) return 0.0;

  const auto radial = detail::gauss_legendre(options.radial_nodes);
  const auto polar = detail::gauss_legendre(options.polar_nodes);
  const int polar_angles = dim - 2;

  // Angular nodes: each direction with its weight on S^{dim-1}.
  std::vector<std::vector<double>> directions;
  std::vector<double> dir_weights;
  if (dim == 1) {
    directions = {{1.0}, {-1.0}};
    dir_weights = {1.0, 1.0};
  } else {
    std::vector<int> idx(polar_angles, 0);
    for (;;) {
      for (int a = 0; a < options.azimuth_nodes; ++a) {
        const double phi = 2.0 * std::numbers::pi * a / options.azimuth_nodes;
        std::vector<double> dir(dim);
        double weight = 2.0 * std::numbers::pi / options.azimuth_nodes;
        double carry = 1.0;  // product of sines so far
        for (int i = 0; i < polar_angles; ++i) {
          const double theta = 0.5 * std::numbers::pi * (polar.x[idx[i]] + 1.0);
          weight *= 0.5 * std::numbers::pi * polar.w[idx[i]] * std::pow(std::sin(theta), dim - 2 - i);
          dir[i] = carry * std::cos(theta);
          carry *= std::sin(theta);
        }
        dir[dim - 2] = carry * std::cos(phi);
        dir[dim - 1] = carry * std::sin(phi);
        directions.push_back(std::move(dir));
        dir_weights.push_back(weight);
      }
      int i = 0;
      while (i < polar_angles && ++idx[i] == options.polar_nodes) idx[i++] = 0;
      if (i == polar_angles) break;
    }
  }

  cplx acc = 0.0;
  MomentumConfig point(1, dim);
  const double panel = radius / options.radial_panels;
  for (int pn = 0; pn < options.radial_panels; ++pn) {
    for (int q = 0; q < options.radial_nodes; ++q) {
      const double r = panel * (pn + 0.5 * (radial.x[q] + 1.0));
      const double wr = 0.5 * panel * radial.w[q] * std::pow(r, dim - 1);
      const double energy = std::sqrt(mass * mass + r * r);
      if (energy == 0.0) continue;
      cplx shell = 0.0;
      for (std::size_t a = 0; a < directions.size(); ++a) {
        for (int l = 0; l < dim; ++l) point[0][l] = r * directions[a][l];
        const double e[1] = {energy};
        shell += dir_weights[a] * std::conj(eval_component(f1, 1, e, point)) * eval_component(f2, 1, e, point);
      }
      acc += wr * shell / (2.0 * energy);
    }
  }
  return acc;
}

struct LszInput {
  LegFunction f;
  double mass = 0.0;
  double t = 0.0;
};

struct AmplitudeRequest {
  std::vector<LszInput> in_states;
  std::vector<LszInput> out_states;
  cplx upsilon = 1.0;
  cplx c4 = 1.0;
  cplx beta_b = 1.0;
  bool include_two_pi_d = true;
  std::optional<CutoffProfile> cutoff;  // LSZ states are evaluated uncut by default
  SignConvention convention = SignConvention::ReflectMinus;
  std::size_t budget = defaults::kBudget;
  std::uint64_t seed = 0;
  int threads = 0;
};

// Legs ordered out1, out2, in1, in2; out legs sit on delta^- shells and in legs
// on delta^+ shells.
inline QuadratureEstimate scalar_4pt_lsz(const AmplitudeRequest& req) {
  if (req.in_states.size() != 2 || req.out_states.size() != 2)
    throw DimensionMismatch("scalar_4pt_lsz: need exactly 2 in-states and 2 out-states");
  const int d = req.out_states[0].f.dim() + 1;
  TestFunctionSequence product = TestFunctionSequence::unit(d);
  ConnectedTerm term;
  term.n = 4;
  term.c_n = req.c4;
  term.upsilon = req.upsilon;
  term.beta_b = req.beta_b;
  term.include_two_pi_d = req.include_two_pi_d;
  term.convention = req.convention;
  auto add = [&](const LszInput& s, ShellSign sign) {
    if (s.f.dim() + 1 != d) throw DimensionMismatch("scalar_4pt_lsz: states have different dimensions");
    product = sequence_product(product, lsz_state(s.f, s.mass, s.t));
    term.pattern.push_back(sign);
    term.masses.push_back(s.mass);
  };
  for (const auto& s : req.out_states) add(s, ShellSign::Minus);
  for (const auto& s : req.in_states) add(s, ShellSign::Plus);
  return tn_eval(term, product, req.cutoff, {req.budget, req.seed, req.threads});
}

}  // namespace shellquad
