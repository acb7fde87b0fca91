#pragma once

#include <stdexcept>
#include <string>

namespace kfdr {

// Library failures carry the module they originated in, so the CLI can
// report "[smoothing] ..." instead of a bare message.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& what)
      : std::runtime_error("[" + module + "] " + what), module_(std::move(module)) {}

  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

}  // namespace kfdr
