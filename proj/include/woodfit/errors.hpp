#pragma once

#include <stdexcept>

namespace woodfit {

/// Too few rings, crossings or samples for a stage to produce a result.
class InsufficientDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values during optimization or rendering.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace woodfit
