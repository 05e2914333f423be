#pragma once

#include <stdexcept>
#include <string>

namespace jsde {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

/// A measure does not satisfy the integrability contract of its role.
class IntegrabilityError : public Error {
 public:
  using Error::Error;
};

class QuadratureError : public Error {
 public:
  using Error::Error;
};

class EstimationError : public Error {
 public:
  EstimationError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Noise specification is inconsistent (infinite jump rate, bad grid, ...).
class SpecError : public Error {
 public:
  using Error::Error;
};

class RefinementError : public Error {
 public:
  using Error::Error;
};

class BlowUpError : public Error {
 public:
  BlowUpError(const std::string& what, double time) : Error(what), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

class LevelExhaustionError : public Error {
 public:
  LevelExhaustionError(const std::string& what, int level) : Error(what), level_(level) {}
  int level() const noexcept { return level_; }

 private:
  int level_;
};

/// Two legs of a coupled run were handed different noise realizations.
class NoiseSharingError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent run configuration. line is 0 when unknown.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, std::string field = {}, int line = 0)
      : Error(decorate(what, field, line)), field_(std::move(field)), line_(line) {}
  const std::string& field() const noexcept { return field_; }
  int line() const noexcept { return line_; }

 private:
  static std::string decorate(const std::string& what, const std::string& field, int line) {
    std::string s;
    if (line > 0) s += "line " + std::to_string(line) + ": ";
    if (!field.empty()) s += field + ": ";
    return s + what;
  }
  std::string field_;
  int line_;
};

}  // namespace jsde
