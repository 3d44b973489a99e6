#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace emonmt {

enum class Errc {
  Io,
  Format,
  InvalidConfig,
  LineCountMismatch,
  EncodingError,
  EmptyLine,
  OutOfRange,
  MissingColumn,
  DuplicateId,
  AlreadyTagged,
  EmptyInput,
  LengthMismatch,
  Degenerate,
  TargetTooSmall,
  UnknownId,
  SequenceTooLong,
  NonFiniteGradient,
  ConfigMismatch,
  NotEnoughCheckpoints,
  SourceTooLong,
  MissingToken,
  EmptyCorpus,
  MissingScore,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::Io: return "Io";
    case Errc::Format: return "Format";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::LineCountMismatch: return "LineCountMismatch";
    case Errc::EncodingError: return "EncodingError";
    case Errc::EmptyLine: return "EmptyLine";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::MissingColumn: return "MissingColumn";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::AlreadyTagged: return "AlreadyTagged";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::Degenerate: return "Degenerate";
    case Errc::TargetTooSmall: return "TargetTooSmall";
    case Errc::UnknownId: return "UnknownId";
    case Errc::SequenceTooLong: return "SequenceTooLong";
    case Errc::NonFiniteGradient: return "NonFiniteGradient";
    case Errc::ConfigMismatch: return "ConfigMismatch";
    case Errc::NotEnoughCheckpoints: return "NotEnoughCheckpoints";
    case Errc::SourceTooLong: return "SourceTooLong";
    case Errc::MissingToken: return "MissingToken";
    case Errc::EmptyCorpus: return "EmptyCorpus";
    case Errc::MissingScore: return "MissingScore";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it onto an exit status.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// Process exit status for the CLI: 2 for data errors, 3 for training failures.
constexpr int exit_code(Errc code) noexcept {
  switch (code) {
    case Errc::NonFiniteGradient: return 3;
    case Errc::InvalidConfig: return 1;
    default: return 2;
  }
}

}  // namespace emonmt
