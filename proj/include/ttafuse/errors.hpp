#pragma once

#include <stdexcept>
#include <string>

namespace ttafuse {

// Bad input data, arguments or configuration. CLI exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Unreadable or unwritable files, malformed documents. CLI exit code 2.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A detector adapter failed to produce detections for a view. CLI exit code 3.
class DetectorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Metric is undefined for the given input (e.g. AP with no ground truth).
class UndefinedMetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace ttafuse
