// shellquad: command-line front end for the verification runs.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "shellquad/commands.hpp"

using namespace shellquad;

namespace {

struct Output {
  std::string path;
  std::string format = "json";
};

int emit(const CommandResult& res, const Output& out, bool has_csv) {
  if (res.exit_code == exit_code::kUsage || res.exit_code == exit_code::kPrecondition) {
    std::cerr << "shellquad: " << res.message << '\n';
    return res.exit_code;
  }
  std::string text;
  if (out.format == "csv") {
    if (!has_csv) {
      std::cerr << "shellquad: usage: --format csv is only available for singularity-scan\n";
      return exit_code::kUsage;
    }
    text = res.csv;
  } else {
    text = res.report.dump(2) + "\n";
  }
  if (out.path.empty()) {
    std::cout << text;
  } else {
    // Written next to the target and renamed, so readers never see a partial report.
    const std::string tmp = out.path + ".tmp";
    {
      std::ofstream file(tmp, std::ios::binary | std::ios::trunc);
      file << text;
      if (!file) {
        std::cerr << "shellquad: usage: cannot write " << out.path << '\n';
        return exit_code::kUsage;
      }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, out.path, ec);
    if (ec) {
      std::filesystem::remove(tmp, ec);
      std::cerr << "shellquad: usage: cannot write " << out.path << '\n';
      return exit_code::kUsage;
    }
  }
  if (res.exit_code != exit_code::kOk) std::cerr << "shellquad: exit " << res.exit_code << '\n';
  return res.exit_code;
}

void add_output(CLI::App* cmd, Output& out) {
  cmd->add_option("--out", out.path, "Write the report to this file instead of stdout");
  cmd->add_option("--format", out.format, "Report format")->check(CLI::IsMember({"json", "csv"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mass-shell delta-functional quadrature and singularity diagnostics"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  const int threads = threads_from_env();

  GradientCheckParams grad;
  Output grad_out;
  std::optional<int> grad_k;
  auto* g = app.add_subcommand("gradient-check", "Minimum gradient norm of P_k(0) for mixed masses");
  g->add_option("--n", grad.n, "Number of legs");
  g->add_option("--d", grad.d, "Spacetime dimension");
  g->add_option("--k", grad_k, "Number of legs with a + sign (default n/2)");
  g->add_option("--masses", grad.masses, "Comma-separated masses")->delimiter(',');
  g->add_option("--draws", grad.draws, "Number of momentum-conserving draws");
  g->add_option("--seed", grad.seed, "Random seed");
  g->add_option("--box", grad.box, "Momentum bound per leg");
  add_output(g, grad_out);

  ScanParams scan;
  Output scan_out;
  std::optional<int> scan_k;
  std::string resolution = "alpha";
  auto* s = app.add_subcommand("singularity-scan", "Dyadic annulus scan around the collinear massless cone");
  s->add_option("--n", scan.n, "Number of legs");
  s->add_option("--d", scan.d, "Spacetime dimension");
  s->add_option("--k", scan_k, "Number of legs with a + sign (default n/2)");
  s->add_option("--masses", scan.masses, "Comma-separated masses (must all be zero)")->delimiter(',');
  s->add_option("--eps", scan.eps, "Outer shell radius");
  s->add_option("--levels", scan.levels, "Number of dyadic shells");
  s->add_option("--budget", scan.budget, "Samples per shell");
  s->add_option("--seed", scan.seed, "Random seed");
  s->add_option("--resolution", resolution, "Delta resolution")->check(CLI::IsMember({"alpha", "exact"}));
  s->add_flag("--strict", scan.strict, "Exit 4 when the verdict is inconclusive");
  add_output(s, scan_out);

  EvaluateParams eval;
  Output eval_out;
  std::optional<double> beta;
  auto* e = app.add_subcommand("evaluate", "Evaluate a connected term on a test-function sequence");
  e->add_option("--term", eval.term_path, "Term file (shellquad.term/1)");
  e->add_option("--sequence", eval.sequence_path, "Sequence file (shellquad.sequence/1)");
  e->add_option("--budget", eval.budget, "Sample budget");
  e->add_option("--seed", eval.seed, "Random seed");
  e->add_option("--beta", beta, "Uniform cutoff beta, overriding the term file");
  add_output(e, eval_out);

  LszParams lsz;
  Output lsz_out;
  auto* l = app.add_subcommand("lsz4", "LSZ 4-point amplitude");
  l->add_option("--states", lsz.states_path, "States file (shellquad.states/1)");
  l->add_option("--budget", lsz.budget, "Sample budget");
  l->add_option("--seed", lsz.seed, "Random seed");
  add_output(l, lsz_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& ok) {
    return app.exit(ok);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return exit_code::kUsage;
  }

  if (g->parsed()) {
    grad.k = grad_k;
    grad.threads = threads;
    return emit(cmd_gradient_check(grad), grad_out, false);
  }
  if (s->parsed()) {
    scan.k = scan_k;
    scan.threads = threads;
    scan.resolution = resolution == "exact" ? ScanResolution::Exact : ScanResolution::Alpha;
    return emit(cmd_singularity_scan(scan), scan_out, true);
  }
  if (e->parsed()) {
    eval.beta = beta;
    eval.threads = threads;
    return emit(cmd_evaluate(eval), eval_out, false);
  }
  lsz.threads = threads;
  return emit(cmd_lsz4(lsz), lsz_out, false);
}
