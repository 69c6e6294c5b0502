#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace epiforge {

enum class Errc {
  MissingColumn,
  UnparsableValue,
  DuplicateKey,
  MissingCoverage,
  UnknownRegion,
  InsufficientAnchors,
  NegativeDoses,
  NoFluxData,
  MissingObservation,
  EmptySeries,
  ConstantColumn,
  InsufficientHistory,
  ParamDomain,
  DegenerateWindow,
  OptimizerDiverged,
  InvalidArgument,
  SingularKernel,
  EmptyTrainingSet,
  EmptyGrid,
  WidthMismatch,
  ZeroActual,
  LengthMismatch,
  ZeroRmse,
  EmptySubset,
  MissingWeight,
  TooManyFeatures,
  SchemaMismatch,
  UnknownFeature,
  IoFailure,
  InvalidConfig,
};

std::string_view to_string(Errc code);

/// Coarse failure classes; the CLI maps each to its own exit status.
enum class ErrorClass { Config = 2, Data = 3, Numeric = 4, Io = 5 };

ErrorClass classify(Errc code);
std::string_view to_string(ErrorClass c);

/// Every failure raised by the library. `module()` names the subsystem that
/// detected the problem so the CLI can print a one-line diagnostic.
class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string module, const std::string& message);

  Errc code() const noexcept { return code_; }
  const std::string& module() const noexcept { return module_; }

 private:
  Errc code_;
  std::string module_;
};

}  // namespace epiforge
