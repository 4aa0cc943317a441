#pragma once

// On-shell energies, the signed energy sum P_k(0) on the momentum-conserving
// surface, its gradient, and the collinear singular cone of the all-massless
// case together with its local quadratic expansion.
//
// Legs are 0-based in code: leg j carries sign +1 for j < k and -1 otherwise.
// The last leg is the dependent one, p_{n-1} = -(p_0 + ... + p_{n-2}).

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shellquad/config.hpp"

namespace shellquad {

namespace vec {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double norm2(std::span<const double> a) { return dot(a, a); }
inline double norm(std::span<const double> a) { return std::sqrt(norm2(a)); }

// Orthonormal basis of the complement of a unit vector (modified Gram-Schmidt
// against the coordinate axes, skipping the most aligned one).
inline std::vector<std::vector<double>> orthonormal_complement(std::span<const double> unit) {
  const std::size_t dim = unit.size();
  std::size_t skip = 0;
  for (std::size_t i = 1; i < dim; ++i)
    if (std::abs(unit[i]) > std::abs(unit[skip])) skip = i;
  std::vector<std::vector<double>> basis;
  basis.reserve(dim - 1);
  for (std::size_t axis = 0; axis < dim; ++axis) {
    if (axis == skip) continue;
    std::vector<double> v(dim, 0.0);
    v[axis] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      const double a = dot(v, unit);
      for (std::size_t i = 0; i < dim; ++i) v[i] -= a * unit[i];
      for (const auto& b : basis) {
        const double c = dot(v, b);
        for (std::size_t i = 0; i < dim; ++i) v[i] -= c * b[i];
      }
    }
    const double len = norm(v);
    for (double& x : v) x /= len;
    basis.push_back(std::move(v));
  }
  return basis;
}

}  // namespace vec

struct ShellConfig {
  int n = 4;
  int d = 4;
  int k = 2;
  std::vector<double> masses;

  static ShellConfig massless(int n, int d, int k) { return {n, d, k, std::vector<double>(n, 0.0)}; }

  int spatial_dim() const { return d - 1; }
  int sign(int leg) const { return leg < k ? 1 : -1; }

  bool all_massless() const {
    return std::all_of(masses.begin(), masses.end(), [](double m) { return m == 0.0; });
  }
  bool all_massive() const {
    return std::all_of(masses.begin(), masses.end(), [](double m) { return m > 0.0; });
  }
  bool mixed() const { return !all_massless() && !all_massive(); }

  void validate() const {
    if (n < 2) throw DimensionMismatch("ShellConfig: n must be >= 2");
    if (d < 3) throw DimensionMismatch("ShellConfig: d must be >= 3");
    if (k < 0 || k > n) throw DimensionMismatch("ShellConfig: k must lie in [0, n]");
    if (static_cast<int>(masses.size()) != n)
      throw DimensionMismatch("ShellConfig: expected " + std::to_string(n) + " masses");
    for (double m : masses)
      if (!(m >= 0.0) || !std::isfinite(m)) throw DomainError("ShellConfig: masses must be finite and >= 0");
  }
};

// A point (p)_n: one spatial (d-1)-vector per leg, stored contiguously.
class MomentumConfig {
 public:
  MomentumConfig() = default;
  MomentumConfig(int legs, int dim) : legs_(legs), dim_(dim), data_(static_cast<std::size_t>(legs) * dim, 0.0) {}

  explicit MomentumConfig(const std::vector<std::vector<double>>& momenta)
      : legs_(static_cast<int>(momenta.size())), dim_(momenta.empty() ? 0 : static_cast<int>(momenta[0].size())) {
    data_.reserve(static_cast<std::size_t>(legs_) * dim_);
    for (const auto& p : momenta) {
      if (static_cast<int>(p.size()) != dim_) throw DimensionMismatch("MomentumConfig: ragged momenta");
      data_.insert(data_.end(), p.begin(), p.end());
    }
  }

  int legs() const { return legs_; }
  int dim() const { return dim_; }

  std::span<double> operator[](int leg) { return {data_.data() + static_cast<std::size_t>(leg) * dim_, static_cast<std::size_t>(dim_)}; }
  std::span<const double> operator[](int leg) const {
    return {data_.data() + static_cast<std::size_t>(leg) * dim_, static_cast<std::size_t>(dim_)};
  }

  std::vector<double> total() const {
    std::vector<double> sum(dim_, 0.0);
    for (int j = 0; j < legs_; ++j)
      for (int l = 0; l < dim_; ++l) sum[l] += (*this)[j][l];
    return sum;
  }

  // Membership in the momentum-conservation surface, relative to the largest leg.
  bool conserved(double tol = tolerance::kMachine) const {
    double scale = 0.0;
    for (int j = 0; j < legs_; ++j) scale = std::max(scale, vec::norm((*this)[j]));
    return vec::norm(total()) <= tol * std::max(scale, 1.0);
  }

  // Overwrite the last leg so the configuration conserves momentum.
  void close() {
    auto last = (*this)[legs_ - 1];
    std::fill(last.begin(), last.end(), 0.0);
    for (int j = 0; j + 1 < legs_; ++j)
      for (int l = 0; l < dim_; ++l) last[l] -= (*this)[j][l];
  }

  MomentumConfig scaled(double beta) const {
    MomentumConfig out = *this;
    for (double& x : out.data_) x *= beta;
    return out;
  }

  std::vector<std::vector<double>> to_nested() const {
    std::vector<std::vector<double>> out;
    for (int j = 0; j < legs_; ++j) out.emplace_back((*this)[j].begin(), (*this)[j].end());
    return out;
  }

  bool operator==(const MomentumConfig&) const = default;

 private:
  int legs_ = 0;
  int dim_ = 0;
  std::vector<double> data_;
};

inline void check_dims(const ShellConfig& config, const MomentumConfig& point) {
  if (point.legs() != config.n || point.dim() != config.spatial_dim())
    throw DimensionMismatch("point has " + std::to_string(point.legs()) + " legs of dimension " +
                            std::to_string(point.dim()) + ", config expects " + std::to_string(config.n) +
                            " of dimension " + std::to_string(config.spatial_dim()));
}

inline double omega(double mass, std::span<const double> p) {
  const double p2 = vec::norm2(p);
  if (mass == 0.0 && p2 == 0.0) throw DomainError("omega: massless leg with zero momentum is an excluded point");
  return std::sqrt(mass * mass + p2);
}

inline double pk0(const ShellConfig& config, const MomentumConfig& point) {
  check_dims(config, point);
  double sum = 0.0;
  for (int j = 0; j < config.n; ++j) sum += config.sign(j) * omega(config.masses[j], point[j]);
  return sum;
}

struct Gradient {
  int rows = 0;
  int cols = 0;
  std::vector<double> entries;  // row-major (n-1) x (d-1)
  double frobenius = 0.0;

  double operator()(int j, int l) const { return entries[static_cast<std::size_t>(j) * cols + l]; }
};

// Gradient of P_k(0) with respect to the independent legs 0..n-2, the last leg
// following from momentum conservation.
inline Gradient gradient(const ShellConfig& config, const MomentumConfig& point) {
  check_dims(config, point);
  const int n = config.n;
  const int dim = config.spatial_dim();
  Gradient g{n - 1, dim, std::vector<double>(static_cast<std::size_t>(n - 1) * dim), 0.0};
  const int last = n - 1;
  const double s_last = config.sign(last);
  const double w_last = omega(config.masses[last], point[last]);
  double frob2 = 0.0;
  for (int j = 0; j < last; ++j) {
    const double s_j = config.sign(j);
    const double w_j = omega(config.masses[j], point[j]);
    for (int l = 0; l < dim; ++l) {
      const double entry = s_j * point[j][l] / w_j - s_last * point[last][l] / w_last;
      g.entries[static_cast<std::size_t>(j) * dim + l] = entry;
      frob2 += entry * entry;
    }
  }
  g.frobenius = std::sqrt(frob2);
  return g;
}

// Collinear all-massless configuration p_j = s_j w_j u with sum_j s_j w_j = 0.
struct SingularRay {
  ShellConfig config;
  std::vector<double> direction;
  std::vector<double> energies;

  MomentumConfig momenta() const {
    const int dim = config.spatial_dim();
    MomentumConfig point(config.n, dim);
    for (int j = 0; j + 1 < config.n; ++j)
      for (int l = 0; l < dim; ++l) point[j][l] = config.sign(j) * energies[j] * direction[l];
    point.close();
    return point;
  }

  // Rescaling the momenta by any beta != 0 stays on the cone; a negative beta
  // reverses the direction.
  SingularRay scaled(double beta) const {
    if (beta == 0.0) throw DomainError("SingularRay::scaled: beta must be nonzero");
    SingularRay out = *this;
    for (double& w : out.energies) w *= std::abs(beta);
    if (beta < 0.0)
      for (double& x : out.direction) x = -x;
    return out;
  }
};

inline SingularRay sample_singular_ray(const ShellConfig& config, std::span<const double> direction,
                                       std::span<const double> energy_seed) {
  config.validate();
  if (!config.all_massless()) throw PreconditionError("sample_singular_ray: all masses must be zero");
  if (config.k < 1 || config.k > config.n - 1)
    throw InfeasibleSplit("sample_singular_ray: k = 0 or k = n admits no balanced energies");
  if (static_cast<int>(direction.size()) != config.spatial_dim())
    throw DimensionMismatch("sample_singular_ray: direction has wrong dimension");
  if (static_cast<int>(energy_seed.size()) != config.n)
    throw DimensionMismatch("sample_singular_ray: need one energy seed per leg");
  const double len = vec::norm(direction);
  if (!(len > 0.0) || !std::isfinite(len)) throw DomainError("sample_singular_ray: direction must be nonzero");

  double positive = 0.0, negative = 0.0;
  for (int j = 0; j < config.n; ++j) {
    if (!(energy_seed[j] > 0.0) || !std::isfinite(energy_seed[j]))
      throw InfeasibleSplit("sample_singular_ray: energy seeds must be finite and positive");
    (config.sign(j) > 0 ? positive : negative) += energy_seed[j];
  }

  SingularRay ray{config, {}, {energy_seed.begin(), energy_seed.end()}};
  ray.direction.resize(direction.size());
  for (std::size_t l = 0; l < direction.size(); ++l) ray.direction[l] = direction[l] / len;
  // Only the negative-sign block is rescaled.
  const double factor = positive / negative;
  for (int j = config.k; j < config.n; ++j) ray.energies[j] *= factor;
  return ray;
}

// Offsets e_j for the perturbed legs j = 1..n-2 (the anchoring leg 0 and the
// dependent leg n-1 carry none). Each satisfies e_j^2 = -2 s_j (u . e_j), so
// s_j u + e_j stays a unit vector.
struct NeighborhoodOffsets {
  std::vector<std::vector<double>> e;

  double r2() const {
    double acc = 0.0;
    for (const auto& v : e) acc += vec::norm2(v);
    return acc;
  }
  double radius() const { return std::sqrt(r2()); }

  static NeighborhoodOffsets zero(const SingularRay& ray) {
    return {std::vector<std::vector<double>>(ray.config.n - 2, std::vector<double>(ray.config.spatial_dim(), 0.0))};
  }
};

// Projects raw vectors onto the constraint: the transverse part is kept and the
// component along u is the root of a^2 + 2 s_j a + |t|^2 = 0 that vanishes with t.
inline NeighborhoodOffsets constrain_offsets(const SingularRay& ray, const std::vector<std::vector<double>>& raw) {
  const int perturbed = ray.config.n - 2;
  if (static_cast<int>(raw.size()) != perturbed) throw DimensionMismatch("constrain_offsets: need n-2 raw vectors");
  NeighborhoodOffsets out;
  out.e.reserve(raw.size());
  const auto& u = ray.direction;
  for (int i = 0; i < perturbed; ++i) {
    if (raw[i].size() != u.size()) throw DimensionMismatch("constrain_offsets: raw vector has wrong dimension");
    const double s = ray.config.sign(i + 1);
    std::vector<double> t = raw[i];
    const double along = vec::dot(t, u);
    for (std::size_t l = 0; l < t.size(); ++l) t[l] -= along * u[l];
    const double t2 = vec::norm2(t);
    if (!(t2 < 1.0)) throw ConstraintViolation("constrain_offsets: transverse part must have norm < 1");
    const double a = -s * t2 / (1.0 + std::sqrt(1.0 - t2));
    for (std::size_t l = 0; l < t.size(); ++l) t[l] += a * u[l];
    out.e.push_back(std::move(t));
  }
  return out;
}

// Largest |e_j^2 + 2 s_j (u . e_j)| over the offsets.
inline double constraint_residual(const SingularRay& ray, const NeighborhoodOffsets& offsets) {
  double worst = 0.0;
  for (std::size_t i = 0; i < offsets.e.size(); ++i) {
    const double s = ray.config.sign(static_cast<int>(i) + 1);
    worst = std::max(worst, std::abs(vec::norm2(offsets.e[i]) + 2.0 * s * vec::dot(ray.direction, offsets.e[i])));
  }
  return worst;
}

inline MomentumConfig neighborhood_point(const SingularRay& ray, const NeighborhoodOffsets& offsets) {
  const int n = ray.config.n;
  const int dim = ray.config.spatial_dim();
  if (static_cast<int>(offsets.e.size()) != n - 2) throw DimensionMismatch("neighborhood_point: need n-2 offsets");
  for (const auto& e : offsets.e)
    if (static_cast<int>(e.size()) != dim) throw DimensionMismatch("neighborhood_point: offset has wrong dimension");
  if (constraint_residual(ray, offsets) > tolerance::kMachine)
    throw ConstraintViolation("neighborhood_point: offsets violate the unit-length constraint");

  MomentumConfig point(n, dim);
  for (int l = 0; l < dim; ++l) point[0][l] = ray.energies[0] * ray.direction[l];
  for (int j = 1; j + 1 < n; ++j) {
    const double s = ray.config.sign(j);
    for (int l = 0; l < dim; ++l) point[j][l] = ray.energies[j] * (s * ray.direction[l] + offsets.e[j - 1][l]);
  }
  point.close();
  return point;
}

struct LocalExpansion {
  double r2 = 0.0;
  std::optional<double> alpha;  // empty when R = 0
  double c_n = 1.0;             // (sum_{j<n-1} s_j w_j) / |p_{n-1}| at the perturbed point
};

// Second-order expansion P_k(0) ~ R^2 alpha around the ray, with
// alpha = (1/2) sum_{j=1..n-1} s_j w_j e_j^2 / R^2 and w_{n-1} e_{n-1} = -sum_j w_j e_j.
inline LocalExpansion local_alpha(const SingularRay& ray, const NeighborhoodOffsets& offsets) {
  const int n = ray.config.n;
  const int dim = ray.config.spatial_dim();
  const MomentumConfig point = neighborhood_point(ray, offsets);

  LocalExpansion out;
  out.r2 = offsets.r2();
  double balance = 0.0;
  for (int j = 0; j + 1 < n; ++j) balance += ray.config.sign(j) * ray.energies[j];
  out.c_n = balance / vec::norm(point[n - 1]);
  if (out.r2 == 0.0) return out;

  const double w_last = ray.energies[n - 1];
  std::vector<double> e_last(dim, 0.0);
  double quadratic = 0.0;
  for (int j = 1; j + 1 < n; ++j) {
    const auto& e = offsets.e[j - 1];
    quadratic += ray.config.sign(j) * ray.energies[j] * vec::norm2(e);
    for (int l = 0; l < dim; ++l) e_last[l] -= ray.energies[j] * e[l] / w_last;
  }
  quadratic += ray.config.sign(n - 1) * w_last * vec::norm2(e_last);
  out.alpha = 0.5 * quadratic / out.r2;
  return out;
}

}  // namespace shellquad
