#pragma once

#include <stdexcept>
#include <string>

namespace geosmooth {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed input file or document.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// External classifier process misbehaved (timeout, bad reply, crash).
class BackendError : public std::runtime_error {
 public:
  BackendError(const std::string& what, std::string payload)
      : std::runtime_error(what), payload_(std::move(payload)) {}
  const std::string& payload() const noexcept { return payload_; }

 private:
  std::string payload_;
};

/// The observed image cannot be the result of any transform in the box.
class InfeasibleInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace geosmooth
