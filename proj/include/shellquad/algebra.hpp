#pragma once

// Terminating sequences of multi-leg test functions built from
// polynomial x Gaussian leg factors, energy multipliers that vanish with all
// derivatives at E = 0, the positive-energy cutoff map phi, the tensor product
// of sequences, and one-leg LSZ states.

#include <cmath>
#include <complex>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shellquad/config.hpp"
#include "shellquad/kinematics.hpp"

namespace shellquad {

using cplx = std::complex<double>;

// exp(-1/E) for E > 0 and exactly 0 otherwise; smooth, flat at the origin.
inline double h_eval(double energy) { return energy > 0.0 ? std::exp(-1.0 / energy) : 0.0; }

struct Monomial {
  std::vector<int> exponents;
  double coeff = 1.0;

  bool operator==(const Monomial&) const = default;
};

// poly(p) * exp(-|p - center|^2 / (2 sigma^2)); an empty polynomial means 1.
struct LegFunction {
  std::vector<double> center;
  double sigma = 1.0;
  std::vector<Monomial> poly;

  int dim() const { return static_cast<int>(center.size()); }

  double operator()(std::span<const double> p) const {
    double r2 = 0.0;
    for (std::size_t l = 0; l < center.size(); ++l) {
      const double x = p[l] - center[l];
      r2 += x * x;
    }
    double value = std::exp(-0.5 * r2 / (sigma * sigma));
    if (!poly.empty()) {
      double acc = 0.0;
      for (const auto& m : poly) {
        double term = m.coeff;
        for (std::size_t l = 0; l < m.exponents.size(); ++l)
          for (int e = 0; e < m.exponents[l]; ++e) term *= p[l];
        acc += term;
      }
      value *= acc;
    }
    return value;
  }

  void validate() const {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw DomainError("LegFunction: sigma must be positive");
    for (const auto& m : poly) {
      if (static_cast<int>(m.exponents.size()) != dim())
        throw DimensionMismatch("LegFunction: monomial exponent count must match the momentum dimension");
      for (int e : m.exponents)
        if (e < 0) throw DomainError("LegFunction: negative exponent");
    }
  }

  bool operator==(const LegFunction&) const = default;
};

// g(E) = h(|E| / beta_g).
struct EnergyMultiplier {
  double beta_g = 1.0;

  double operator()(double energy) const { return h_eval(std::abs(energy) / beta_g); }
  bool operator==(const EnergyMultiplier&) const = default;
};

// (omega + E) exp(i omega t) with omega the on-shell energy for this mass.
struct LszFactor {
  double mass = 0.0;
  double t = 0.0;

  cplx operator()(double energy, std::span<const double> p) const {
    const double w = std::sqrt(mass * mass + vec::norm2(p));
    return (w + energy) * std::polar(1.0, w * t);
  }
  bool operator==(const LszFactor&) const = default;
};

struct LegFactor {
  LegFunction f;
  std::optional<EnergyMultiplier> emult;
  std::optional<LszFactor> lsz;
  std::vector<double> cutoffs;  // one h(E / beta) factor per applied phi

  cplx operator()(double energy, std::span<const double> p) const {
    cplx value = f(p);
    if (emult) value *= (*emult)(energy);
    if (lsz) value *= (*lsz)(energy, p);
    for (double beta : cutoffs) value *= h_eval(energy / beta);
    return value;
  }
  bool operator==(const LegFactor&) const = default;
};

struct Term {
  cplx coeff{1.0, 0.0};
  std::vector<LegFactor> legs;

  bool operator==(const Term&) const = default;
};

struct CutoffProfile {
  std::vector<double> betas;  // per leg position; positions past the end use fallback
  double fallback = 1.0;

  static CutoffProfile uniform(double beta) { return {{}, beta}; }

  double beta(std::size_t position) const { return position < betas.size() ? betas[position] : fallback; }

  void validate() const {
    if (!(fallback > 0.0)) throw DomainError("CutoffProfile: beta must be positive");
    for (double b : betas)
      if (!(b > 0.0)) throw DomainError("CutoffProfile: beta must be positive");
  }
};

class TestFunctionSequence {
 public:
  explicit TestFunctionSequence(int d, cplx scalar = 0.0) : d_(d), scalar_(scalar) {
    if (d < 3) throw DimensionMismatch("TestFunctionSequence: d must be >= 3");
  }

  static TestFunctionSequence unit(int d) { return TestFunctionSequence(d, 1.0); }
  static TestFunctionSequence zero(int d) { return TestFunctionSequence(d, 0.0); }

  static TestFunctionSequence single(int d, Term term) {
    TestFunctionSequence seq(d);
    seq.add_term(std::move(term));
    return seq;
  }

  int d() const { return d_; }
  cplx scalar() const { return scalar_; }
  void set_scalar(cplx value) { scalar_ = value; }

  const std::map<int, std::vector<Term>>& components() const { return components_; }

  const std::vector<Term>* component(int n) const {
    auto it = components_.find(n);
    return it == components_.end() ? nullptr : &it->second;
  }

  void add_term(Term term) {
    const int n = static_cast<int>(term.legs.size());
    if (n == 0) {
      scalar_ += term.coeff;
      return;
    }
    for (const auto& leg : term.legs) {
      if (leg.f.dim() != d_ - 1) throw DimensionMismatch("add_term: leg dimension does not match d - 1");
      leg.f.validate();
    }
    components_[n].push_back(std::move(term));
  }

  // Highest leg count with a nonzero entry, or 0 for a pure scalar.
  int degree() const {
    for (auto it = components_.rbegin(); it != components_.rend(); ++it)
      if (!it->second.empty()) return it->first;
    return 0;
  }

 private:
  int d_;
  cplx scalar_;
  std::map<int, std::vector<Term>> components_;
};

inline void check_same_d(const TestFunctionSequence& a, const TestFunctionSequence& b) {
  if (a.d() != b.d()) throw DimensionMismatch("sequences have different spacetime dimension");
}

inline cplx eval_term(const Term& term, std::span<const double> energies, const MomentumConfig& momenta) {
  cplx value = term.coeff;
  for (std::size_t j = 0; j < term.legs.size(); ++j) value *= term.legs[j](energies[j], momenta[static_cast<int>(j)]);
  return value;
}

// Evaluates entry n at (E_j, p_j); returns 0 when the entry is absent.
inline cplx eval_component(const TestFunctionSequence& seq, int n, std::span<const double> energies,
                           const MomentumConfig& momenta) {
  if (n == 0) return seq.scalar();
  if (static_cast<int>(energies.size()) != n || momenta.legs() != n || momenta.dim() != seq.d() - 1)
    throw DimensionMismatch("eval_component: arguments do not match leg count / dimension");
  const auto* terms = seq.component(n);
  if (terms == nullptr) return 0.0;
  cplx acc = 0.0;
  for (const auto& term : *terms) acc += eval_term(term, energies, momenta);
  return acc;
}

inline TestFunctionSequence phi_map(const TestFunctionSequence& seq, const CutoffProfile& cutoff) {
  cutoff.validate();
  TestFunctionSequence out(seq.d(), seq.scalar());
  for (const auto& [n, terms] : seq.components()) {
    for (Term term : terms) {
      for (std::size_t j = 0; j < term.legs.size(); ++j) term.legs[j].cutoffs.push_back(cutoff.beta(j));
      out.add_term(std::move(term));
    }
  }
  return out;
}

// Component n of a x b is sum_{j+m=n} a_j (x) b_m, b's legs after a's.
inline TestFunctionSequence sequence_product(const TestFunctionSequence& a, const TestFunctionSequence& b) {
  check_same_d(a, b);
  TestFunctionSequence out(a.d(), a.scalar() * b.scalar());
  if (b.scalar() != 0.0)
    for (const auto& [n, terms] : a.components())
      for (Term term : terms) {
        term.coeff *= b.scalar();
        out.add_term(std::move(term));
      }
  if (a.scalar() != 0.0)
    for (const auto& [n, terms] : b.components())
      for (Term term : terms) {
        term.coeff *= a.scalar();
        out.add_term(std::move(term));
      }
  for (const auto& [na, ta] : a.components())
    for (const auto& [nb, tb] : b.components())
      for (const auto& x : ta)
        for (const auto& y : tb) {
          Term joined{x.coeff * y.coeff, x.legs};
          joined.legs.insert(joined.legs.end(), y.legs.begin(), y.legs.end());
          out.add_term(std::move(joined));
        }
  return out;
}

inline TestFunctionSequence sequence_sum(const TestFunctionSequence& a, const TestFunctionSequence& b) {
  check_same_d(a, b);
  TestFunctionSequence out = a;
  out.set_scalar(a.scalar() + b.scalar());
  for (const auto& [n, terms] : b.components())
    for (const auto& term : terms) out.add_term(term);
  return out;
}

inline TestFunctionSequence scaled(const TestFunctionSequence& a, cplx factor) {
  TestFunctionSequence out(a.d(), a.scalar() * factor);
  for (const auto& [n, terms] : a.components())
    for (Term term : terms) {
      term.coeff *= factor;
      out.add_term(std::move(term));
    }
  return out;
}

inline TestFunctionSequence one_leg(int d, LegFactor leg, cplx coeff = 1.0) {
  return TestFunctionSequence::single(d, Term{coeff, {std::move(leg)}});
}

// l(E, p) = (omega + E) exp(i omega t) f(p).
inline TestFunctionSequence lsz_state(const LegFunction& f, double mass, double t) {
  if (!(mass >= 0.0)) throw DomainError("lsz_state: mass must be >= 0");
  LegFactor leg{f, std::nullopt, LszFactor{mass, t}, {}};
  return one_leg(f.dim() + 1, std::move(leg));
}

}  // namespace shellquad
