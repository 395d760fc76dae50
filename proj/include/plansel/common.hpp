#pragma once

#include <stdexcept>
#include <string>

namespace plansel {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace plansel
