#pragma once

#include <stdexcept>
#include <string>

namespace cmc {

enum class Errc {
  invalid_argument = 1,
  numeric_failure = 2,
  io_failure = 3,
  unsupported = 4,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace cmc
