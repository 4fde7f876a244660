#pragma once

#include <stdexcept>
#include <string>

namespace attninf {

// Malformed or inconsistent input data (files, checkpoints, corpora).
// Precondition violations on arguments use std::invalid_argument instead.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace attninf
