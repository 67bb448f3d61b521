#pragma once

#include <stdexcept>
#include <string>

namespace reskan {

// Invalid layer/network/run configuration (bad shapes, bad switch combos).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Problems with input data (files, labels, splits).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Caller misuse of an API or CLI surface.
class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure during optimization (NaN gradients/loss).
class TrainError : public std::runtime_error {
 public:
  explicit TrainError(const std::string& msg) : std::runtime_error(msg) {}
};

// Corrupt or truncated on-disk artifacts.
class IntegrityError : public std::runtime_error {
 public:
  explicit IntegrityError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace reskan
