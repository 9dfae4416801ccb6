#pragma once

#include <stdexcept>
#include <string>

namespace phonosig {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent user input: files, labels, flags.
class InputError : public Error {
 public:
  using Error::Error;
};

// A numerical precondition does not hold (singular matrix, constant sample, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

}  // namespace phonosig
