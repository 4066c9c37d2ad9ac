#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>

namespace seareg {

enum class Errc {
  InvalidArgument,
  AngleNearPi,
  OutOfRange,
  EmptySubmap,
  DegenerateHull,
  NoCandidates,
  MissingNormals,
  MissingColours,
  TooFewPoints,
  EmptyKeypointSet,
  DimensionMismatch,
  KindMismatch,
  InsufficientCorrespondences,
  AlignmentFailed,
  NoOverlap,
  Io,
  Parse,
};

inline std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::AngleNearPi: return "AngleNearPi";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::EmptySubmap: return "EmptySubmap";
    case Errc::DegenerateHull: return "DegenerateHull";
    case Errc::NoCandidates: return "NoCandidates";
    case Errc::MissingNormals: return "MissingNormals";
    case Errc::MissingColours: return "MissingColours";
    case Errc::TooFewPoints: return "TooFewPoints";
    case Errc::EmptyKeypointSet: return "EmptyKeypointSet";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::KindMismatch: return "KindMismatch";
    case Errc::InsufficientCorrespondences: return "InsufficientCorrespondences";
    case Errc::AlignmentFailed: return "AlignmentFailed";
    case Errc::NoOverlap: return "NoOverlap";
    case Errc::Io: return "Io";
    case Errc::Parse: return "Parse";
  }
  return "Unknown";
}

/// Exception carrying a typed error code. All library failures are reported
/// through this type (or a subclass with extra diagnostics).
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

namespace log {

using Sink = std::function<void(std::string_view)>;

namespace detail {
inline Sink& sink() {
  static Sink s = [](std::string_view msg) { std::cerr << "[seareg] warning: " << msg << '\n'; };
  return s;
}
inline std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

/// Replace the warning sink; returns the previous one.
inline Sink set_sink(Sink sink) {
  std::lock_guard lock(detail::sink_mutex());
  Sink old = std::move(detail::sink());
  detail::sink() = std::move(sink);
  return old;
}

inline void warn(std::string_view msg) {
  std::lock_guard lock(detail::sink_mutex());
  if (detail::sink()) detail::sink()(msg);
}

}  // namespace log
}  // namespace seareg
