#ifndef ACOUSTWIN_ERRORS_HPP
#define ACOUSTWIN_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace acoustwin {

// A query value lies outside the normalization ranges the model was trained on.
class OutOfRange : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Cholesky factorization failed even at the largest allowed jitter.
class FailureEscalation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class VersionMismatch : public FormatError {
 public:
  using FormatError::FormatError;
};

class OutOfGrid : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace acoustwin

#endif  // ACOUSTWIN_ERRORS_HPP
