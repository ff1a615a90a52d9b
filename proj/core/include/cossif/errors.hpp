#pragma once

#include <stdexcept>
#include <string>

namespace cossif {

/// Malformed input data or a violated data contract (bad file, bad id,
/// out-of-range parameter). The CLI maps this to exit code 2.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cossif
