#pragma once

#include <stdexcept>

namespace hetattn {

/// Malformed input data (bad file, bad record, bad config value). The CLI maps
/// it to exit code 2; every other exception is an internal error.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hetattn
