#pragma once

#include <iostream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace relemb {

/// Every recoverable failure in the library is reported as a relemb::Error.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline void warn(std::string_view msg) { std::cerr << "warning: " << msg << '\n'; }

}  // namespace relemb
