#pragma once

#include <stdexcept>
#include <string>

namespace siegel {

// error categories map onto CLI exit codes: input -> 1, numerical -> 2,
// acceptance (used by --check style verification) -> 3
enum class errc { input = 1, numerical = 2, acceptance = 3 };

class error : public std::runtime_error {
 public:
  error(errc c, const std::string& msg) : std::runtime_error(msg), code_(c) {}
  errc code() const { return code_; }

 private:
  errc code_;
};

inline error input_error(const std::string& msg) { return error(errc::input, msg); }
inline error numerical_error(const std::string& msg) { return error(errc::numerical, msg); }

}  // namespace siegel
