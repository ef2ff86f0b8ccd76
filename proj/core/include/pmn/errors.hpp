#pragma once

#include <stdexcept>
#include <string>

namespace pmn {

// Shape or length disagreement between operands.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input outside the mathematical domain of an operation (empty reduction,
// zero-norm cosine, single-class metric, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Invalid hyperparameters or model/data configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// API called out of order (backward without forward, empty batch, ...).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Malformed data records, out-of-range labels.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values appearing during a numeric pass.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible file format version or checkpoint/config mismatch.
class VersionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pmn
