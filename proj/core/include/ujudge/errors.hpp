#pragma once

#include <stdexcept>
#include <string>

namespace ujudge {

/// Bad invocation: wrong arguments, precondition violated by the caller.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input data cannot be used (unreadable file, unparseable record, missing labels).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Broken configuration: template section missing, unknown backend, bad config key.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Backend failure that must stop the run (authentication, missing credentials).
class BackendFatal : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ujudge
