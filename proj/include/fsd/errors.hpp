#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace fsd {

/// Error codes for contract violations surfaced by the framework.
/// Application-logic failures (a predicate or splitter callback throwing)
/// are not represented here; those envelopes are routed to the dead-letter
/// sink instead of raising.
enum class Errc {
  DuplicateStageName,
  DanglingEdge,
  DuplicateRouteKey,
  IllegalCycle,
  InvalidFeedback,
  InvalidStageFanout,
  NoSuchStage,
  NoSuchRoute,
  ShuttingDown,
  WallClockAdvance,
  SimulatedOnly,
  InvalidArgument,
  DuplicateTicket,
  BadPolicy,
  EmptyTierList,
  NoRouteProduced,
  ParseError,
  ConfigError,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::DuplicateStageName: return "DuplicateStageName";
    case Errc::DanglingEdge: return "DanglingEdge";
    case Errc::DuplicateRouteKey: return "DuplicateRouteKey";
    case Errc::IllegalCycle: return "IllegalCycle";
    case Errc::InvalidFeedback: return "InvalidFeedback";
    case Errc::InvalidStageFanout: return "InvalidStageFanout";
    case Errc::NoSuchStage: return "NoSuchStage";
    case Errc::NoSuchRoute: return "NoSuchRoute";
    case Errc::ShuttingDown: return "ShuttingDown";
    case Errc::WallClockAdvance: return "WallClockAdvance";
    case Errc::SimulatedOnly: return "SimulatedOnly";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::DuplicateTicket: return "DuplicateTicket";
    case Errc::BadPolicy: return "BadPolicy";
    case Errc::EmptyTierList: return "EmptyTierList";
    case Errc::NoRouteProduced: return "NoRouteProduced";
    case Errc::ParseError: return "ParseError";
    case Errc::ConfigError: return "ConfigError";
  }
  return "UnknownError";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace fsd
