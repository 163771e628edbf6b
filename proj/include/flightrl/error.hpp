#pragma once

#include <stdexcept>
#include <string>

namespace flightrl {

// Process exit codes used by the command line tool.
enum class ExitCode : int {
    kSuccess = 0,
    kFailure = 1,
    kConfig = 2,
    kDivergence = 3,
    kParse = 4,
};

class Error : public std::runtime_error {
  public:
    explicit Error(const std::string &what, ExitCode code = ExitCode::kFailure)
        : std::runtime_error(what), code_(code) {}

    ExitCode code() const noexcept { return code_; }

  private:
    ExitCode code_;
};

// Argument outside the domain of a model (e.g. altitude above the atmosphere table).
class DomainError : public Error {
  public:
    explicit DomainError(const std::string &what) : Error(what, ExitCode::kDivergence) {}
};

// Simulation or training produced non-finite values.
class DivergenceError : public Error {
  public:
    explicit DivergenceError(const std::string &what) : Error(what, ExitCode::kDivergence) {}
};

class ConfigError : public Error {
  public:
    ConfigError(const std::string &field, const std::string &what)
        : Error(field + ": " + what, ExitCode::kConfig), field_(field), detail_(what) {}

    const std::string &field() const noexcept { return field_; }
    const std::string &detail() const noexcept { return detail_; }

  private:
    std::string field_;
    std::string detail_;
};

// Malformed or unsupported file. Line is 1-based, 0 when not applicable.
class ParseError : public Error {
  public:
    ParseError(const std::string &source, std::size_t line, const std::string &what)
        : Error(source + (line ? ":" + std::to_string(line) : std::string()) + ": " + what,
                ExitCode::kParse),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

class IoError : public Error {
  public:
    explicit IoError(const std::string &what) : Error(what, ExitCode::kParse) {}
};

class TrimError : public Error {
  public:
    explicit TrimError(const std::string &what) : Error(what) {}
};

class DesignError : public Error {
  public:
    explicit DesignError(const std::string &what) : Error(what) {}
};

// Caller broke a documented precondition (shape mismatch, missing cache).
class ContractViolation : public std::logic_error {
  public:
    using std::logic_error::logic_error;
};

} // namespace flightrl
