#include "procbench/error.hpp"

namespace procbench {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::NonFiniteState: return "NonFiniteState";
    case Errc::SingularJacobian: return "SingularJacobian";
    case Errc::MaxIterations: return "MaxIterations";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::DegenerateLevel: return "DegenerateLevel";
    case Errc::DegenerateVolume: return "DegenerateVolume";
    case Errc::ZeroRecycleFlow: return "ZeroRecycleFlow";
    case Errc::TemperatureOutOfRange: return "TemperatureOutOfRange";
    case Errc::ZeroModifier: return "ZeroModifier";
    case Errc::EpisodeNotStarted: return "EpisodeNotStarted";
    case Errc::EpisodeFinished: return "EpisodeFinished";
    case Errc::ConfigError: return "ConfigError";
    case Errc::SolverStalled: return "SolverStalled";
    case Errc::NoFeasibleSteadyState: return "NoFeasibleSteadyState";
    case Errc::IllConditionedKernel: return "IllConditionedKernel";
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::FormatVersionMismatch: return "FormatVersionMismatch";
    case Errc::CorruptRow: return "CorruptRow";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace procbench
