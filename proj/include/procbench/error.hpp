#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace procbench {

enum class Errc {
  NonFiniteState,
  SingularJacobian,
  MaxIterations,
  InvalidArgument,
  DegenerateLevel,
  DegenerateVolume,
  ZeroRecycleFlow,
  TemperatureOutOfRange,
  ZeroModifier,
  EpisodeNotStarted,
  EpisodeFinished,
  ConfigError,
  SolverStalled,
  NoFeasibleSteadyState,
  IllConditionedKernel,
  DimMismatch,
  FormatVersionMismatch,
  CorruptRow,
  EmptyDataset,
  Io,
};

std::string_view errc_name(Errc code) noexcept;

// Single exception type for the whole library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace procbench
