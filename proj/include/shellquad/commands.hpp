#pragma once

// Command implementations behind the shellquad CLI. Each returns its exit
// code and report instead of printing, so they can be driven in-process.
//
// Exit codes: 0 success / verdict reached, 2 usage or schema error,
// 3 precondition violated, 4 numerically inconclusive where a verdict was
// required (--strict) or a regularity check failed.

#include <chrono>
#include <cstdlib>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "shellquad/io.hpp"
#include "shellquad/quadrature.hpp"
#include "shellquad/vev.hpp"

namespace shellquad {

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kUsage = 2;
inline constexpr int kPrecondition = 3;
inline constexpr int kInconclusive = 4;
}  // namespace exit_code

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct CommandResult {
  int exit_code = exit_code::kOk;
  json report;      // full report including the run manifest
  std::string csv;  // shell table (singularity-scan only)
  std::string message;
};

// Report without the wall-time field: equal across re-runs of one manifest.
inline json report_payload(json report) {
  if (report.contains("manifest")) report["manifest"].erase("wall_time");
  return report;
}

inline int threads_from_env() {
  const char* v = std::getenv("SHELLQUAD_THREADS");
  if (v == nullptr) return 0;
  try {
    return std::max(0, std::stoi(v));
  } catch (const std::exception&) {
    return 0;
  }
}

namespace detail {

inline json manifest(const std::string& command, const json& params, std::uint64_t seed, const json& inputs,
                     double wall) {
  return json{{"command", command},
              {"params", params},
              {"seed", seed},
              {"version", kVersion},
              {"config_hash", canonical_hash(json{{"params", params}, {"inputs", inputs}})},
              {"wall_time", wall}};
}

// Runs body and maps library exceptions onto exit codes.
inline CommandResult guarded(const std::function<CommandResult()>& body) {
  try {
    return body();
  } catch (const PreconditionError& e) {
    return {exit_code::kPrecondition, json{{"schema", kReportSchema}, {"error", std::string("precondition: ") + e.what()}},
            {}, std::string("precondition: ") + e.what()};
  } catch (const InfeasibleSplit& e) {
    return {exit_code::kPrecondition, json{{"schema", kReportSchema}, {"error", std::string("precondition: ") + e.what()}},
            {}, std::string("precondition: ") + e.what()};
  } catch (const std::invalid_argument& e) {
    return {exit_code::kUsage, json{{"schema", kReportSchema}, {"error", std::string("usage: ") + e.what()}}, {},
            std::string("usage: ") + e.what()};
  } catch (const std::domain_error& e) {
    return {exit_code::kUsage, json{{"schema", kReportSchema}, {"error", std::string("usage: ") + e.what()}}, {},
            std::string("usage: ") + e.what()};
  }
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline int default_k(int n, std::optional<int> k) { return k ? *k : n / 2; }

}  // namespace detail

// ---- gradient-check

struct GradientCheckParams {
  int n = 4;
  int d = 4;
  std::optional<int> k;
  std::vector<double> masses;  // empty: leg 0 massive (m = 1), the rest massless
  std::size_t draws = 100'000;
  std::uint64_t seed = 0;
  double box = defaults::kBoxMomentum;
  int threads = 0;

  json to_json() const {
    return json{{"n", n}, {"d", d}, {"k", detail::default_k(n, k)}, {"masses", resolved_masses()},
                {"draws", draws}, {"box", box}};
  }
  std::vector<double> resolved_masses() const {
    if (!masses.empty()) return masses;
    std::vector<double> m(std::max(n, 0), 0.0);
    if (!m.empty()) m[0] = 1.0;
    return m;
  }
};

inline CommandResult cmd_gradient_check(const GradientCheckParams& p) {
  const auto t0 = std::chrono::steady_clock::now();
  return detail::guarded([&] {
    if (p.draws == 0) throw UsageError("--draws must be positive");
    if (!(p.box > 0.0)) throw UsageError("--box must be positive");
    ShellConfig config{p.n, p.d, detail::default_k(p.n, p.k), p.resolved_masses()};
    config.validate();
    if (!config.mixed()) throw PreconditionError("mixed masses required");
    const MinGradient res = mixed_mass_min_gradient(config, p.draws, p.seed, p.box, p.threads);
    const bool above_threshold = res.min_norm > tolerance::kGradientFloor;
    const bool above_floor = res.min_norm >= res.analytic_floor;
    json result{{"min_norm", res.min_norm},
                {"analytic_floor", res.analytic_floor},
                {"threshold", tolerance::kGradientFloor},
                {"draws", res.draws},
                {"rejected", res.rejected},
                {"argmin", res.argmin.to_nested()},
                {"above_threshold", above_threshold},
                {"above_floor", above_floor}};
    const json params = p.to_json();
    CommandResult out;
    out.exit_code = above_threshold && above_floor ? exit_code::kOk : exit_code::kInconclusive;
    out.report = json{{"schema", kReportSchema},
                      {"manifest", detail::manifest("gradient-check", params, p.seed, json(nullptr), detail::seconds_since(t0))},
                      {"result", result}};
    return out;
  });
}

// ---- singularity-scan

struct ScanParams {
  int n = 4;
  int d = 4;
  std::optional<int> k;
  std::vector<double> masses;  // must be all zero when given
  double eps = defaults::kScanEps;
  int levels = defaults::kScanLevels;
  std::size_t budget = defaults::kShellBudget;
  std::uint64_t seed = 0;
  bool strict = false;
  ScanResolution resolution = ScanResolution::Alpha;
  int threads = 0;

  json to_json() const {
    return json{{"n", n},           {"d", d},         {"k", detail::default_k(n, k)},
                {"masses", masses.empty() ? std::vector<double>(std::max(n, 0), 0.0) : masses},
                {"eps", eps},       {"levels", levels}, {"budget", budget},
                {"strict", strict}, {"resolution", to_string(resolution)}};
  }
};

// Default scan integrand: prod_j h(w_j) exp(-|p|^2 / 2), rotation invariant and
// vanishing with all derivatives at zero energy.
inline DeltaFunctional default_scan_functional(const ShellConfig& config) {
  DeltaFunctional df;
  df.config = config;
  df.integrand = [](const MomentumConfig& p) -> cplx {
    double s = 0.0, cut = 1.0;
    for (int j = 0; j < p.legs(); ++j) {
      const double w2 = vec::norm2(p[j]);
      s += w2;
      cut *= h_eval(std::sqrt(w2));
    }
    return cut * std::exp(-0.5 * s);
  };
  return df;
}

inline CommandResult cmd_singularity_scan(const ScanParams& p) {
  const auto t0 = std::chrono::steady_clock::now();
  return detail::guarded([&] {
    if (p.budget == 0) throw UsageError("--budget must be positive");
    if (p.levels < 1) throw UsageError("--levels must be >= 1");
    if (!(p.eps > 0.0)) throw UsageError("--eps must be positive");
    if (!p.masses.empty()) {
      if (static_cast<int>(p.masses.size()) != p.n) throw UsageError("--masses needs n entries");
      for (double m : p.masses)
        if (m != 0.0) throw PreconditionError("singularity scan requires all masses zero");
    }
    ShellConfig config = ShellConfig::massless(p.n, p.d, detail::default_k(p.n, p.k));
    config.validate();
    std::vector<double> direction(config.spatial_dim(), 0.0);
    direction[0] = 1.0;
    const SingularRay ray = sample_singular_ray(config, direction, std::vector<double>(p.n, 1.0));
    const AnnulusScan scan =
        annulus_scan(default_scan_functional(config), ray, p.eps, p.levels, {p.budget, p.seed, p.threads, p.resolution});
    const ExponentFit fit = exponent_fit(scan);
    CommandResult out;
    out.exit_code = p.strict && fit.verdict == Verdict::Inconclusive ? exit_code::kInconclusive : exit_code::kOk;
    out.csv = shells_csv(scan);
    out.report = json{{"schema", kReportSchema},
                      {"manifest", detail::manifest("singularity-scan", p.to_json(), p.seed, json(nullptr),
                                                    detail::seconds_since(t0))},
                      {"result", to_json(scan, fit)}};
    return out;
  });
}

// ---- evaluate

struct EvaluateParams {
  std::string term_path;
  std::string sequence_path;
  std::size_t budget = defaults::kBudget;
  std::uint64_t seed = 0;
  std::optional<double> beta;  // overrides the term file's cutoff with a uniform one
  int threads = 0;
};

inline CommandResult cmd_evaluate(const EvaluateParams& p) {
  const auto t0 = std::chrono::steady_clock::now();
  return detail::guarded([&] {
    if (p.budget == 0) throw UsageError("--budget must be positive");
    if (p.term_path.empty()) throw UsageError("--term is required");
    if (p.sequence_path.empty()) throw UsageError("--sequence is required");
    TermInput input = term_from_json(read_json_file(p.term_path));
    const TestFunctionSequence seq = sequence_from_json(read_json_file(p.sequence_path));
    if (p.beta) {
      if (!(*p.beta > 0.0)) throw UsageError("--beta must be positive");
      input.cutoff = CutoffProfile::uniform(*p.beta);
    }
    const json inputs{{"term", to_json(input)}, {"sequence", to_json(seq)}};
    const std::string hash = canonical_hash(inputs);
    json params{{"budget", p.budget}};
    if (p.beta) params["beta"] = *p.beta;

    const auto reason = structural_zero_reason(input.term);
    if (!reason && seq.component(input.term.n) == nullptr)
      throw UsageError("sequence has no " + std::to_string(input.term.n) + "-leg component");
    const QuadratureEstimate est = tn_eval(input.term, seq, input.cutoff, {p.budget, p.seed, p.threads});
    json result = to_json(est, hash);
    if (reason) result["structural_zero_reason"] = *reason;
    result["pattern"] = pattern_string(input.term.pattern);
    result["sign_adapter"] = to_string(input.term.convention);
    CommandResult out;
    out.report = json{{"schema", kReportSchema},
                      {"manifest", detail::manifest("evaluate", params, p.seed, inputs, detail::seconds_since(t0))},
                      {"result", result}};
    return out;
  });
}

// ---- lsz4

struct LszParams {
  std::string states_path;
  std::size_t budget = defaults::kBudget;
  std::uint64_t seed = 0;
  int threads = 0;
};

inline constexpr const char* kTwoPointNormalization = "1/(2 omega)";

inline json amplitude_to_json(const QuadratureEstimate& est, const AmplitudeRequest& req) {
  return json{{"value", complex_to_json(est.value)},
              {"stderr", est.std_error},
              {"samples", est.samples},
              {"seed", est.seed},
              {"states_hash", canonical_hash(states_to_json(req))},
              {"convention",
               {{"sign_adapter", to_string(req.convention)}, {"two_point_normalization", kTwoPointNormalization}}}};
}

inline CommandResult cmd_lsz4(const LszParams& p) {
  const auto t0 = std::chrono::steady_clock::now();
  return detail::guarded([&] {
    if (p.budget == 0) throw UsageError("--budget must be positive");
    if (p.states_path.empty()) throw UsageError("--states is required");
    AmplitudeRequest req = states_from_json(read_json_file(p.states_path));
    req.budget = p.budget;
    req.seed = p.seed;
    req.threads = p.threads;
    const QuadratureEstimate est = scalar_4pt_lsz(req);
    CommandResult out;
    out.report = json{{"schema", kReportSchema},
                      {"manifest", detail::manifest("lsz4", json{{"budget", p.budget}}, p.seed, states_to_json(req),
                                                    detail::seconds_since(t0))},
                      {"result", amplitude_to_json(est, req)}};
    return out;
  });
}

}  // namespace shellquad
