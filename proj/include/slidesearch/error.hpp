#pragma once

#include <stdexcept>
#include <string>

namespace slidesearch {

// Bad flags, config files, or arguments. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Missing, malformed, or inconsistent input data. The CLI maps this to exit
// code 3.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace slidesearch
