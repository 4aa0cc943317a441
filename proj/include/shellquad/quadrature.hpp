#pragma once

// Monte Carlo evaluation of
//
//   I[F] = int prod_{j<n-1} d^{d-1}p_j  delta(sum_j s_j w_j) F((p)_n),
//   p_{n-1} = -(p_0 + ... + p_{n-2}),
//
// by co-area reduction along one radial coordinate, an independent
// nascent-delta oracle, dyadic annulus scans around the collinear massless
// cone, and the mixed-mass gradient scan.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shellquad/algebra.hpp"
#include "shellquad/config.hpp"
#include "shellquad/kinematics.hpp"
#include "shellquad/parallel.hpp"
#include "shellquad/rng.hpp"

namespace shellquad {

namespace stream_tag {
inline constexpr std::uint32_t kCoarea = 1;
inline constexpr std::uint32_t kOracle = 2;
inline constexpr std::uint32_t kGradient = 3;
inline constexpr std::uint32_t kScan = 100;  // + level
}  // namespace stream_tag

inline double unit_sphere_area(int dim) {
  // Surface of S^{dim-1} in R^dim.
  return 2.0 * std::pow(std::numbers::pi, 0.5 * dim) / std::tgamma(0.5 * dim);
}

// Proposal hint for one leg, in integration-variable coordinates.
struct LegHint {
  std::vector<double> center;
  double scale = 1.0;
};

using Integrand = std::function<cplx(const MomentumConfig&)>;

struct DeltaFunctional {
  ShellConfig config;
  Integrand integrand;
  double normalization = 1.0;
  std::vector<LegHint> hints;        // empty: centred unit-scale proposals
  double cutoff_beta = 1.0;          // sets the massless root floor
  std::optional<double> root_max;    // overrides the envelope-based radius bound
  std::string sign_adapter = "none"; // label carried into reports

  LegHint hint(int leg) const {
    if (leg < static_cast<int>(hints.size())) return hints[leg];
    return {std::vector<double>(config.spatial_dim(), 0.0), 1.0};
  }
};

struct QuadratureEstimate {
  cplx value{};
  double std_error = 0.0;
  std::size_t samples = 0;
  double excluded_radius = 0.0;
  std::uint64_t seed = 0;
  bool no_support = false;
  bool structural_zero = false;
};

struct EvalOptions {
  std::size_t budget = defaults::kBudget;
  std::uint64_t seed = 0;
  int threads = 0;
  bool symmetrize = true;  // average over role assignments within each sign block
};

// Two-component Gaussian mixture around the hinted centre.
class LegProposal {
 public:
  LegProposal() = default;
  explicit LegProposal(const LegHint& hint)
      : center_(hint.center), narrow_(1.3 * hint.scale), wide_(3.0 * hint.scale) {}

  // z: standard normals, pick: uniform deciding the mixture component.
  void sample(std::span<const double> z, double pick, std::span<double> out) const {
    const double width = pick < kNarrowWeight ? narrow_ : wide_;
    for (std::size_t l = 0; l < out.size(); ++l) out[l] = center_[l] + width * z[l];
  }

  double density(std::span<const double> p) const {
    double r2 = 0.0;
    for (std::size_t l = 0; l < p.size(); ++l) r2 += (p[l] - center_[l]) * (p[l] - center_[l]);
    const double dim = static_cast<double>(p.size());
    return kNarrowWeight * gauss(r2, narrow_, dim) + (1.0 - kNarrowWeight) * gauss(r2, wide_, dim);
  }

 private:
  static double gauss(double r2, double sigma, double dim) {
    return std::exp(-0.5 * r2 / (sigma * sigma)) / std::pow(2.0 * std::numbers::pi * sigma * sigma, 0.5 * dim);
  }

  static constexpr double kNarrowWeight = 0.8;
  std::vector<double> center_;
  double narrow_ = 1.3;
  double wide_ = 3.0;
};

namespace detail {

inline std::vector<std::vector<int>> role_assignments(int n, int k, bool symmetrize) {
  std::vector<int> first(k), last(n - k);
  std::iota(first.begin(), first.end(), 0);
  std::iota(last.begin(), last.end(), k);
  std::vector<std::vector<int>> out;
  if (!symmetrize) {
    std::vector<int> id(n);
    std::iota(id.begin(), id.end(), 0);
    out.push_back(std::move(id));
    return out;
  }
  std::vector<int> a = first;
  do {
    std::vector<int> b = last;
    do {
      std::vector<int> perm = a;
      perm.insert(perm.end(), b.begin(), b.end());
      out.push_back(std::move(perm));
    } while (std::next_permutation(b.begin(), b.end()));
  } while (std::next_permutation(a.begin(), a.end()));
  return out;
}

inline bool has_massless_zero(const ShellConfig& config, const MomentumConfig& point) {
  for (int j = 0; j < config.n; ++j)
    if (config.masses[j] == 0.0 && vec::norm2(point[j]) == 0.0) return true;
  return false;
}

// Bisection for a sign change of f on [lo, hi]; f(lo) and f(hi) have opposite signs.
template <class F>
double bisect(F&& f, double lo, double hi, double f_lo) {
  for (int it = 0; it < defaults::kBisectionIters; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double f_mid = f(mid);
    if (f_mid == 0.0) return mid;
    if ((f_mid < 0.0) == (f_lo < 0.0)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

inline QuadratureEstimate no_support_estimate(std::uint64_t seed) {
  QuadratureEstimate est;
  est.seed = seed;
  est.no_support = true;
  return est;
}

// Co-area estimator. The dependent leg is eliminated by momentum
// conservation; for every other leg c in turn, the remaining legs are drawn
// from their proposals, c gets a uniform direction, and its radius r is
// resolved on the energy-conserving surface by bracketed bisection over
// kRootBrackets sub-intervals. Each root carries |S^{d-2}| r^{d-2} / |g_c|
// times the partition-of-unity weight g_c^2 / |g|^2, where g_i is the radial
// derivative of P along leg i. Summing over c removes the blow-up of any single
// radial coordinate where its derivative vanishes.
inline QuadratureEstimate eval_delta_functional(const DeltaFunctional& df, const EvalOptions& options = {}) {
  const ShellConfig& config = df.config;
  config.validate();
  if (config.k == 0 || config.k == config.n) return no_support_estimate(options.seed);

  const int n = config.n;
  const int dim = config.spatial_dim();
  const int free_legs = n - 1;
  const auto roles = detail::role_assignments(n, config.k, options.symmetrize);
  std::vector<LegProposal> proposals;
  std::vector<double> root_lo(n), root_hi(n);
  for (int j = 0; j < n; ++j) {
    const LegHint h = df.hint(j);
    proposals.emplace_back(h);
    root_lo[j] = config.masses[j] == 0.0 ? defaults::kMasslessRootFloor * df.cutoff_beta : 0.0;
    root_hi[j] = df.root_max ? *df.root_max : vec::norm(h.center) + defaults::kEnvelopeSigmas * h.scale;
  }
  const double sphere = unit_sphere_area(dim);
  double excluded = 0.0;
  for (int j = 0; j < n; ++j) excluded = std::max(excluded, root_lo[j]);

  auto sample = [&](RandomStream& stream) -> std::array<cplx, 1> {
    std::vector<double> direction(dim);
    stream.unit_vector(direction);
    std::vector<double> z(static_cast<std::size_t>(free_legs) * dim);
    std::vector<double> pick(free_legs);
    for (double& x : z) x = stream.normal();
    for (double& x : pick) x = stream.uniform();

    MomentumConfig point(n, dim);
    std::vector<double> q_sum(dim), g(free_legs);
    cplx total = 0.0;
    for (const auto& perm : roles) {
      const int dep = perm.back();
      const double m_dep = config.masses[dep];
      const double s_dep = config.sign(dep);
      for (int c = 0; c < free_legs; ++c) {
        const int root = perm[c];
        double density = 1.0;
        double mid_energy = 0.0;
        std::fill(q_sum.begin(), q_sum.end(), 0.0);
        for (int i = 0; i < free_legs; ++i) {
          if (i == c) continue;
          const int leg = perm[i];
          auto p = point[leg];
          proposals[leg].sample(std::span<const double>(z).subspan(static_cast<std::size_t>(i) * dim, dim), pick[i], p);
          density *= proposals[leg].density(p);
          mid_energy += config.sign(leg) * std::sqrt(config.masses[leg] * config.masses[leg] + vec::norm2(p));
          for (int l = 0; l < dim; ++l) q_sum[l] += p[l];
        }
        if (!(density > 0.0)) continue;
        const double uq = vec::dot(direction, q_sum);
        const double q2 = vec::norm2(q_sum);
        const double m_root = config.masses[root];
        const double s_root = config.sign(root);
        auto energy_sum = [&](double r) {
          const double dep2 = std::max(0.0, r * r + 2.0 * r * uq + q2);
          return s_root * std::sqrt(m_root * m_root + r * r) + mid_energy + s_dep * std::sqrt(m_dep * m_dep + dep2);
        };

        const double lo = root_lo[root];
        const double hi = root_hi[root];
        if (!(hi > lo)) continue;
        const double step = (hi - lo) / defaults::kRootBrackets;
        double a = lo;
        double f_a = energy_sum(a);
        cplx contribution = 0.0;
        for (int b = 1; b <= defaults::kRootBrackets; ++b) {
          const double right = b == defaults::kRootBrackets ? hi : lo + b * step;
          const double f_right = energy_sum(right);
          const bool crossing = f_right == 0.0 || (f_a != 0.0 && (f_a < 0.0) != (f_right < 0.0));
          if (crossing) {
            const double r = f_right == 0.0 ? right : detail::bisect(energy_sum, a, right, f_a);
            for (int l = 0; l < dim; ++l) {
              point[root][l] = r * direction[l];
              point[dep][l] = -(r * direction[l] + q_sum[l]);
            }
            if (r > 0.0 && !detail::has_massless_zero(config, point)) {
              const auto p_dep = point[dep];
              const double w_dep = std::sqrt(m_dep * m_dep + vec::norm2(p_dep));
              for (int i = 0; i < free_legs; ++i) {
                const int leg = perm[i];
                const auto p = point[leg];
                const double len = vec::norm(p);
                const double w = std::sqrt(config.masses[leg] * config.masses[leg] + len * len);
                g[i] = len > 0.0 ? config.sign(leg) * len / w - s_dep * vec::dot(p_dep, p) / (len * w_dep) : 0.0;
              }
              const double g2 = vec::norm2(g);
              if (g[c] != 0.0 && g2 > 0.0)
                contribution += df.integrand(point) * (sphere * std::pow(r, dim - 1) * std::abs(g[c]) / g2);
            }
          }
          a = right;
          f_a = f_right;
        }
        total += contribution / density;
      }
    }
    return {total * (df.normalization / static_cast<double>(roles.size()))};
  };

  const auto moments = sample_moments<1>(options.budget, options.seed, stream_tag::kCoarea, options.threads, sample);
  QuadratureEstimate est;
  est.value = moments.mean(0);
  est.std_error = moments.stderr_of_mean(0);
  est.samples = moments.count;
  est.excluded_radius = excluded;
  est.seed = options.seed;
  return est;
}

struct OracleEstimate {
  QuadratureEstimate estimate;        // Richardson-extrapolated value
  double sigma = 0.0;
  std::array<cplx, 3> ladder{};       // smeared integrals at sigma, sigma/2, sigma/4
  std::array<double, 3> ladder_error{};
  bool reliable = true;               // false when the ladder is not monotone
};

// Independent check: delta(P) replaced by a normalized Gaussian of width
// sigma, plain importance-sampled Monte Carlo over all (n-1)(d-1) momentum
// components, then Richardson extrapolation over sigma, sigma/2, sigma/4
// removing the O(sigma) and O(sigma^2) smearing terms. The linear term is
// present whenever the surface carries critical points of P (equal-mass
// sign-balanced legs), where the density of states has a kink.
inline OracleEstimate nascent_delta_oracle(const DeltaFunctional& df, double sigma, const EvalOptions& options = {}) {
  const ShellConfig& config = df.config;
  config.validate();
  if (!(sigma > 0.0)) throw DomainError("nascent_delta_oracle: sigma must be positive");
  OracleEstimate out;
  out.sigma = sigma;
  if (config.k == 0 || config.k == config.n) {
    out.estimate = no_support_estimate(options.seed);
    return out;
  }
  const int n = config.n;
  const int dim = config.spatial_dim();
  std::vector<LegProposal> proposals;
  for (int j = 0; j + 1 < n; ++j) proposals.emplace_back(df.hint(j));
  const std::array<double, 3> widths{sigma, sigma / 2.0, sigma / 4.0};

  auto sample = [&](RandomStream& stream) -> std::array<cplx, 6> {
    MomentumConfig point(n, dim);
    std::vector<double> z(dim);
    double density = 1.0;
    for (int j = 0; j + 1 < n; ++j) {
      for (double& x : z) x = stream.normal();
      const double pick = stream.uniform();
      proposals[j].sample(z, pick, point[j]);
      density *= proposals[j].density(point[j]);
    }
    point.close();
    if (!(density > 0.0) || detail::has_massless_zero(config, point)) return {};
    const double energy = pk0(config, point);
    std::array<double, 3> kernel{};
    for (int i = 0; i < 3; ++i)
      kernel[i] = std::exp(-0.5 * energy * energy / (widths[i] * widths[i])) /
                  (std::sqrt(2.0 * std::numbers::pi) * widths[i]);
    if (kernel[0] == 0.0 && kernel[1] == 0.0 && kernel[2] == 0.0) return {};
    const cplx w = df.integrand(point) * (df.normalization / density);
    const double extrapolated = (8.0 * kernel[2] - 6.0 * kernel[1] + kernel[0]) / 3.0;
    return {w * kernel[0], w * kernel[1], w * kernel[2], w * extrapolated,
            w * (kernel[1] - kernel[0]), w * (kernel[2] - kernel[1])};
  };

  const auto moments = sample_moments<6>(options.budget, options.seed, stream_tag::kOracle, options.threads, sample);
  for (int i = 0; i < 3; ++i) {
    out.ladder[i] = moments.mean(i);
    out.ladder_error[i] = moments.stderr_of_mean(i);
  }
  out.estimate.value = moments.mean(3);
  out.estimate.std_error = moments.stderr_of_mean(3);
  out.estimate.samples = moments.count;
  out.estimate.seed = options.seed;
  // Successive ladder steps must not change sign beyond their own noise.
  const double d1 = moments.mean(4).real();
  const double d2 = moments.mean(5).real();
  const double z = tolerance::kVerdictSigmas;
  const bool resolved1 = std::abs(d1) > z * moments.stderr_of_mean(4);
  const bool resolved2 = std::abs(d2) > z * moments.stderr_of_mean(5);
  out.reliable = !(resolved1 && resolved2 && (d1 < 0.0) != (d2 < 0.0));
  return out;
}

enum class ScanResolution { Alpha, Exact };

inline const char* to_string(ScanResolution r) { return r == ScanResolution::Alpha ? "alpha" : "exact"; }

struct ShellIntegral {
  int level = 0;
  double r_lo = 0.0;
  double r_hi = 0.0;
  double integral = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

struct AnnulusScan {
  SingularRay ray;
  double eps = 0.0;
  int levels = 0;
  ScanResolution resolution = ScanResolution::Alpha;
  std::vector<ShellIntegral> shells;
};

struct ScanOptions {
  std::size_t budget = defaults::kShellBudget;  // per shell
  std::uint64_t seed = 0;
  int threads = 0;
  ScanResolution resolution = ScanResolution::Alpha;
  double energy_window = 2.0;  // perturbed-leg energies range over [w/window, w*window]
};

// Contribution of the neighbourhood of a singular ray, shell by shell in the
// radius R of the stacked transverse offsets, per unit solid angle of the
// anchoring direction u. Coordinates: anchoring energy x_0 along u, perturbed
// legs x_j (s_j u + e_j) with x_j inside the energy window around the ray,
// dependent leg from momentum conservation. The transverse parts t_j of the
// e_j carry polar coordinates (R, omega) in dimension (d-2)(n-2).
//
// With W = x_0 + sum_j s_j x_j and Q = sum_j x_j e_j the energy sum is
// P = W - |W u + Q|, whose zero set is that of
// R^2 alpha = (sum_j s_j x_j e_j^2 - Q^2 / W) / 2.
// Each sample resolves the delta in every energy coordinate x_c in turn,
// weighted by the partition of unity g_c^2 / |g|^2 (g the energy gradient), so
// no single coordinate's degenerate direction produces unbounded weights.
inline AnnulusScan annulus_scan(const DeltaFunctional& df, const SingularRay& ray, double eps, int levels,
                                const ScanOptions& options = {}) {
  const ShellConfig& config = df.config;
  config.validate();
  if (!config.all_massless()) throw PreconditionError("annulus_scan: all masses must be zero");
  if (ray.config.n != config.n || ray.config.d != config.d || ray.config.k != config.k)
    throw DimensionMismatch("annulus_scan: ray and functional have different configurations");
  if (config.n < 3) throw PreconditionError("annulus_scan: need at least one perturbed leg (n >= 3)");
  if (config.k < 1 || config.k > config.n - 1) throw InfeasibleSplit("annulus_scan: k must lie in [1, n-1]");
  if (!(eps > 0.0) || !(eps < 1.0))
    throw ConstraintViolation("annulus_scan: eps must lie in (0, 1) so that transverse offsets stay below unit length");
  if (levels < 1) throw DomainError("annulus_scan: need at least one level");
  if (!(options.energy_window > 1.0)) throw DomainError("annulus_scan: energy window must exceed 1");

  const int n = config.n;
  const int dim = config.spatial_dim();
  const int transverse = dim - 1;
  const int perturbed = n - 2;
  const int coords = n - 1;  // x_0 .. x_{n-2}
  const int stacked = transverse * perturbed;
  const auto& u = ray.direction;
  const auto basis = vec::orthonormal_complement(u);
  const double sphere = unit_sphere_area(stacked);
  const double cap = df.root_max ? *df.root_max
                                 : vec::norm(df.hint(0).center) + defaults::kEnvelopeSigmas * df.hint(0).scale;
  const bool exact = options.resolution == ScanResolution::Exact;
  std::vector<double> lo(coords), hi(coords);
  lo[0] = 0.0;
  hi[0] = cap;
  for (int i = 1; i < coords; ++i) {
    lo[i] = ray.energies[i] / options.energy_window;
    hi[i] = ray.energies[i] * options.energy_window;
  }

  AnnulusScan scan{ray, eps, levels, options.resolution, {}};
  for (int level = 0; level < levels; ++level) {
    const double r_hi = eps * std::ldexp(1.0, -level);
    const double r_lo = 0.5 * r_hi;

    auto sample = [&](RandomStream& stream) -> std::array<cplx, 1> {
      const double rho = r_lo * std::exp2(stream.uniform());
      std::vector<double> omega_dir(stacked);
      stream.unit_vector(omega_dir);
      std::vector<double> uniforms(coords);
      for (double& x : uniforms) x = stream.uniform();

      // Offsets e_j and unit directions s_j u + e_j of the perturbed legs (index j = 1..n-2).
      double geometry = sphere * std::pow(rho, stacked - 1) * rho * std::numbers::ln2;
      std::vector<std::vector<double>> e(coords, std::vector<double>(dim, 0.0));
      std::vector<std::vector<double>> unit(coords, std::vector<double>(dim, 0.0));
      std::vector<double> sign(coords, 1.0), e2(coords, 0.0);
      for (int j = 1; j < coords; ++j) {
        sign[j] = config.sign(j);
        std::vector<double> t(dim, 0.0);
        for (int b = 0; b < transverse; ++b)
          for (int l = 0; l < dim; ++l) t[l] += rho * omega_dir[(j - 1) * transverse + b] * basis[b][l];
        const double t2 = vec::norm2(t);
        const double along = -sign[j] * t2 / (1.0 + std::sqrt(1.0 - t2));
        for (int l = 0; l < dim; ++l) {
          e[j][l] = along * u[l] + t[l];
          unit[j][l] = sign[j] * u[l] + e[j][l];
        }
        e2[j] = vec::norm2(e[j]);
        geometry /= std::sqrt(1.0 - t2);
      }
      for (int l = 0; l < dim; ++l) unit[0][l] = u[l];

      std::vector<double> q(dim), v(dim);
      auto w_of = [&](const std::vector<double>& x) {
        double w = x[0];
        for (int j = 1; j < coords; ++j) w += sign[j] * x[j];
        return w;
      };
      // Energy sum in the selected resolution; -inf marks W <= 0 in alpha form.
      auto energy = [&](const std::vector<double>& x) {
        if (exact) {
          std::fill(v.begin(), v.end(), 0.0);
          for (int j = 0; j < coords; ++j)
            for (int l = 0; l < dim; ++l) v[l] += x[j] * unit[j][l];
          return w_of(x) - vec::norm(v);
        }
        const double w = w_of(x);
        if (!(w > 0.0)) return -std::numeric_limits<double>::infinity();
        std::fill(q.begin(), q.end(), 0.0);
        double quad = 0.0;
        for (int j = 1; j < coords; ++j) {
          quad += sign[j] * x[j] * e2[j];
          for (int l = 0; l < dim; ++l) q[l] += x[j] * e[j][l];
        }
        return 0.5 * (quad - vec::norm2(q) / w);
      };
      // Gradient with respect to x_0 .. x_{n-2}.
      auto grad = [&](const std::vector<double>& x, std::vector<double>& g) {
        if (exact) {
          std::fill(v.begin(), v.end(), 0.0);
          for (int j = 0; j < coords; ++j)
            for (int l = 0; l < dim; ++l) v[l] += x[j] * unit[j][l];
          const double len = vec::norm(v);
          for (int j = 0; j < coords; ++j) g[j] = sign[j] - vec::dot(v, unit[j]) / len;
          return;
        }
        const double w = w_of(x);
        std::fill(q.begin(), q.end(), 0.0);
        for (int j = 1; j < coords; ++j)
          for (int l = 0; l < dim; ++l) q[l] += x[j] * e[j][l];
        g[0] = 0.5 * vec::norm2(q) / (w * w);
        for (int j = 1; j < coords; ++j) {
          double acc = 0.0;
          for (int l = 0; l < dim; ++l) {
            const double y = e[j][l] - sign[j] * q[l] / w;
            acc += y * y;
          }
          g[j] = 0.5 * sign[j] * acc;
        }
      };

      std::vector<double> x(coords), g(coords);
      MomentumConfig point(n, dim);
      cplx total = 0.0;
      for (int c = 0; c < coords; ++c) {
        double inv_density = 1.0;
        for (int j = 0; j < coords; ++j) {
          if (j == c) continue;
          x[j] = lo[j] + (hi[j] - lo[j]) * uniforms[j];
          inv_density *= hi[j] - lo[j];
        }
        // The energy sum is monotone in every coordinate: increasing in x_j
        // for s_j = +1, decreasing for s_j = -1.
        double a = lo[c], b = hi[c];
        if (!exact && c > 0) {
          // Keep W > 0 inside the bracket.
          x[c] = 0.0;
          const double w_rest = w_of(x);
          if (sign[c] > 0.0) a = std::max(a, -w_rest);
          else b = std::min(b, w_rest);
          if (!(b > a)) continue;
        }
        auto along_c = [&](double value) {
          x[c] = value;
          return energy(x);
        };
        if (!exact && c == 0) {
          // Closed form: W = Q^2 / sum_j s_j x_j e_j^2.
          double quad = 0.0;
          std::fill(q.begin(), q.end(), 0.0);
          for (int j = 1; j < coords; ++j) {
            quad += sign[j] * x[j] * e2[j];
            for (int l = 0; l < dim; ++l) q[l] += x[j] * e[j][l];
          }
          if (!(quad > 0.0)) continue;
          double rest = 0.0;
          for (int j = 1; j < coords; ++j) rest += sign[j] * x[j];
          x[0] = vec::norm2(q) / quad - rest;
          if (!(x[0] > a && x[0] <= b)) continue;
        } else {
          const double f_a = along_c(a > 0.0 ? a : 1e-12 * b);
          const double f_b = along_c(b);
          if ((f_a < 0.0) == (f_b < 0.0)) continue;
          x[c] = detail::bisect(along_c, a > 0.0 ? a : 1e-12 * b, b, f_a);
        }
        grad(x, g);
        const double g2 = vec::norm2(g);
        if (!(g2 > 0.0) || g[c] == 0.0) continue;

        for (int l = 0; l < dim; ++l) point[0][l] = x[0] * u[l];
        for (int j = 1; j < coords; ++j)
          for (int l = 0; l < dim; ++l) point[j][l] = x[j] * unit[j][l];
        point.close();
        if (detail::has_massless_zero(config, point)) continue;
        double jacobian = geometry * inv_density;
        for (int j = 0; j < coords; ++j) jacobian *= std::pow(x[j], dim - 1);
        total += df.integrand(point) * (jacobian * std::abs(g[c]) / g2);
      }
      return {total * df.normalization};
    };

    const auto moments = sample_moments<1>(options.budget, options.seed,
                                           stream_tag::kScan + static_cast<std::uint32_t>(level), options.threads, sample);
    scan.shells.push_back({level, r_lo, r_hi, moments.mean(0).real(), moments.stderr_of_mean(0), moments.count});
  }
  return scan;
}

enum class Verdict { Summable, LogDivergent, Divergent, Inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Summable: return "summable";
    case Verdict::LogDivergent: return "log-divergent";
    case Verdict::Divergent: return "divergent";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

struct ExponentFit {
  double exponent = std::numeric_limits<double>::quiet_NaN();
  double std_error = std::numeric_limits<double>::quiet_NaN();
  Verdict verdict = Verdict::Inconclusive;
  std::string reason;
  std::vector<double> ratios;  // I_{j+1} / I_j
};

// Shell-mass exponent from integrals over dyadic shells j = 0, 1, ...:
// I_j ~ 2^{-j * exponent}. Weighted least squares in log I_j.
inline ExponentFit exponent_fit(std::span<const double> integrals, std::span<const double> errors) {
  ExponentFit fit;
  const std::size_t levels = integrals.size();
  for (std::size_t j = 0; j + 1 < levels; ++j)
    fit.ratios.push_back(integrals[j] != 0.0 ? integrals[j + 1] / integrals[j] : std::numeric_limits<double>::quiet_NaN());
  if (levels < 3) {
    fit.reason = "need at least 3 levels";
    return fit;
  }
  bool weighted = false;
  for (std::size_t j = 0; j < levels; ++j) {
    if (!(integrals[j] > 0.0)) {
      fit.reason = "non-positive shell integral at level " + std::to_string(j);
      return fit;
    }
    const double rel = errors[j] / integrals[j];
    if (!(rel < tolerance::kMaxShellRelErr)) {
      fit.reason = "relative standard error above threshold at level " + std::to_string(j);
      return fit;
    }
    weighted = weighted || errors[j] > 0.0;
  }

  double s = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::vector<double> x(levels), y(levels), wt(levels);
  for (std::size_t j = 0; j < levels; ++j) {
    x[j] = static_cast<double>(j) * std::numbers::ln2;
    y[j] = std::log(integrals[j]);
    const double sigma = weighted ? std::max(errors[j] / integrals[j], 1e-12) : 1.0;
    wt[j] = 1.0 / (sigma * sigma);
    s += wt[j];
    sx += wt[j] * x[j];
    sy += wt[j] * y[j];
    sxx += wt[j] * x[j] * x[j];
    sxy += wt[j] * x[j] * y[j];
  }
  const double det = s * sxx - sx * sx;
  const double slope = (s * sxy - sx * sy) / det;
  const double intercept = (sy - slope * sx) / s;
  fit.exponent = -slope;
  if (weighted) {
    double chi2 = 0.0;
    for (std::size_t j = 0; j < levels; ++j) {
      const double r = y[j] - intercept - slope * x[j];
      chi2 += wt[j] * r * r;
    }
    const double inflation = std::max(1.0, chi2 / static_cast<double>(levels - 2));
    fit.std_error = std::sqrt(inflation * s / det);
  } else {
    fit.std_error = 0.0;
  }

  const double z = tolerance::kVerdictSigmas;
  if (std::abs(fit.exponent) < tolerance::kLogDivergentBand) {
    fit.verdict = Verdict::LogDivergent;
  } else if (fit.exponent - z * fit.std_error > 0.0) {
    fit.verdict = Verdict::Summable;
  } else if (fit.exponent + z * fit.std_error < 0.0) {
    fit.verdict = Verdict::Divergent;
  } else {
    fit.reason = "exponent not resolved from zero at the requested confidence";
  }
  return fit;
}

inline ExponentFit exponent_fit(const AnnulusScan& scan) {
  std::vector<double> integrals, errors;
  for (const auto& s : scan.shells) {
    integrals.push_back(s.integral);
    errors.push_back(s.std_error);
  }
  return exponent_fit(integrals, errors);
}

struct MinGradient {
  double min_norm = std::numeric_limits<double>::infinity();
  double analytic_floor = 0.0;
  std::size_t draws = 0;
  std::size_t rejected = 0;
  MomentumConfig argmin;
};

inline double min_gradient_norm(const ShellConfig& config, std::span<const MomentumConfig> points) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : points) best = std::min(best, gradient(config, p).frobenius);
  return best;
}

// 1 - |v| for a leg of this mass at the largest admissible momentum.
inline double velocity_gap(double mass, double box) {
  const double energy = std::sqrt(mass * mass + box * box);
  return mass * mass / (energy * (energy + box));
}

// Minimum gradient norm over momentum-conserving draws with every leg inside
// the ball |p| <= box, together with the floor min_i (1 - |v_i|) over massive
// legs, which bounds the norm from below whenever massless legs are present.
inline MinGradient mixed_mass_min_gradient(const ShellConfig& config, std::size_t draws, std::uint64_t seed,
                                           double box = defaults::kBoxMomentum, int threads = 0) {
  config.validate();
  if (!config.mixed()) throw PreconditionError("mixed_mass_min_gradient: mixed masses required");
  if (!(box > 0.0)) throw DomainError("mixed_mass_min_gradient: box must be positive");
  const int n = config.n;
  const int dim = config.spatial_dim();

  MinGradient init;
  init.analytic_floor = std::numeric_limits<double>::infinity();
  for (double m : config.masses)
    if (m > 0.0) init.analytic_floor = std::min(init.analytic_floor, velocity_gap(m, box));

  auto body = [&](std::size_t, RandomStream& stream, std::size_t count) {
    MinGradient part;
    MomentumConfig point(n, dim);
    std::vector<double> dir(dim);
    for (std::size_t i = 0; i < count; ++i) {
      for (;;) {
        for (int j = 0; j + 1 < n; ++j) {
          stream.unit_vector(dir);
          const double radius = box * std::pow(stream.uniform(), 1.0 / dim);
          for (int l = 0; l < dim; ++l) point[j][l] = radius * dir[l];
        }
        point.close();
        if (vec::norm(point[n - 1]) <= box && !detail::has_massless_zero(config, point)) break;
        ++part.rejected;
      }
      ++part.draws;
      const double norm = gradient(config, point).frobenius;
      if (norm < part.min_norm) {
        part.min_norm = norm;
        part.argmin = point;
      }
    }
    return part;
  };
  auto merge = [](MinGradient& acc, const MinGradient& part) {
    acc.draws += part.draws;
    acc.rejected += part.rejected;
    if (part.min_norm < acc.min_norm) {
      acc.min_norm = part.min_norm;
      acc.argmin = part.argmin;
    }
  };
  return run_partitions<MinGradient>(draws, seed, stream_tag::kGradient, threads, body, merge, init);
}

// ---------------------------------------------------------------------------
// Binding sequence components to mass shells.
//
// The connected functions list delta^- legs first, while P_k(0) gives the first
// k legs a + sign. Both agree once the delta^- legs are moved to the front:
// energy conservation sum_j E_j = 0 with E = -w on delta^- legs reads
// sum_{minus} w - sum_{plus} w = 0. This is the single place where that
// reordering happens.

enum class ShellSign { Minus, Plus };

enum class SignConvention {
  ReflectMinus,  // delta^- legs read f through conj f(w, -p)
  Literal,       // delta^- legs read f(-w, p)
};

inline const char* to_string(SignConvention c) {
  return c == SignConvention::ReflectMinus ? "reflect-minus" : "literal";
}

struct ShellBinding {
  DeltaFunctional functional;
  std::vector<int> order;  // canonical position -> original leg
};

inline ShellBinding bind_on_shell(const TestFunctionSequence& seq, int n, std::span<const ShellSign> pattern,
                                  std::span<const double> masses, SignConvention convention) {
  if (static_cast<int>(pattern.size()) != n || static_cast<int>(masses.size()) != n)
    throw DimensionMismatch("bind_on_shell: pattern and masses need one entry per leg");
  const auto* terms_ptr = seq.component(n);
  std::vector<Term> terms = terms_ptr ? *terms_ptr : std::vector<Term>{};

  ShellBinding out;
  for (int j = 0; j < n; ++j)
    if (pattern[j] == ShellSign::Minus) out.order.push_back(j);
  const int k = static_cast<int>(out.order.size());
  for (int j = 0; j < n; ++j)
    if (pattern[j] == ShellSign::Plus) out.order.push_back(j);

  ShellConfig config{n, seq.d(), k, std::vector<double>(n)};
  std::vector<bool> minus(n);
  for (int c = 0; c < n; ++c) {
    config.masses[c] = masses[out.order[c]];
    minus[c] = c < k;
  }

  DeltaFunctional& df = out.functional;
  df.config = config;
  df.sign_adapter = to_string(convention);
  const bool reflect = convention == SignConvention::ReflectMinus;
  if (!terms.empty()) {
    double beta = std::numeric_limits<double>::infinity();
    for (int c = 0; c < n; ++c) {
      const LegFactor& leg = terms.front().legs[out.order[c]];
      LegHint hint{leg.f.center, leg.f.sigma};
      if (minus[c] && reflect)
        for (double& x : hint.center) x = -x;
      df.hints.push_back(std::move(hint));
      for (double b : leg.cutoffs) beta = std::min(beta, b);
    }
    if (std::isfinite(beta)) df.cutoff_beta = beta;
  }

  df.integrand = [terms = std::move(terms), order = out.order, minus, masses = config.masses, reflect,
                  dim = config.spatial_dim()](const MomentumConfig& point) -> cplx {
    const int legs = point.legs();
    std::vector<double> energy(legs);
    std::vector<bool> conjugate(legs);
    MomentumConfig args(legs, dim);
    for (int c = 0; c < legs; ++c) {
      const double w = std::sqrt(masses[c] * masses[c] + vec::norm2(point[c]));
      const int o = order[c];
      conjugate[o] = minus[c] && reflect;
      energy[o] = minus[c] && !reflect ? -w : w;
      for (int l = 0; l < dim; ++l) args[o][l] = conjugate[o] ? -point[c][l] : point[c][l];
    }
    cplx acc = 0.0;
    for (const auto& term : terms) {
      cplx value = term.coeff;
      for (int o = 0; o < legs; ++o) {
        const cplx leg = term.legs[o](energy[o], args[o]);
        value *= conjugate[o] ? std::conj(leg) : leg;
      }
      acc += value;
    }
    return acc;
  };
  return out;
}

}  // namespace shellquad
