#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace shellquad {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kReportSchema = "shellquad.report/1";
inline constexpr const char* kSequenceSchema = "shellquad.sequence/1";
inline constexpr const char* kTermSchema = "shellquad.term/1";
inline constexpr const char* kStatesSchema = "shellquad.states/1";

// All numeric thresholds live here.
namespace tolerance {
// Machine-precision checks on unit-scaled data.
inline constexpr double kMachine = 1e-12;
// Central-difference gradient check.
inline constexpr double kFiniteDiffStep = 1e-5;
inline constexpr double kFiniteDiffAgreement = 1e-6;
// Exponent-fit verdict thresholds.
inline constexpr double kLogDivergentBand = 0.15;
inline constexpr double kMaxShellRelErr = 0.20;
inline constexpr double kVerdictSigmas = 2.0;
// Minimum gradient norm accepted as "nonvanishing".
inline constexpr double kGradientFloor = 1e-12;
}  // namespace tolerance

namespace defaults {
inline constexpr std::size_t kBudget = 1'000'000;
inline constexpr std::size_t kShellBudget = 100'000;
inline constexpr std::size_t kPartitionSize = 4096;
inline constexpr int kRootBrackets = 64;
inline constexpr int kBisectionIters = 60;
inline constexpr double kEnvelopeSigmas = 6.0;
inline constexpr double kMasslessRootFloor = 1e-2;  // times the cutoff beta
inline constexpr double kBoxMomentum = 10.0;
inline constexpr double kScanEps = 0.05;
inline constexpr int kScanLevels = 5;
}  // namespace defaults

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

struct DimensionMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct PreconditionError : std::logic_error {
  using std::logic_error::logic_error;
};

struct ConstraintViolation : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct InfeasibleSplit : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

}  // namespace shellquad
