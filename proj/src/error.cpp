#include "fbdnn/error.hpp"

namespace fbdnn {

int exit_code_for(const std::exception& e) noexcept {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    return static_cast<int>(err->kind());
  }
  return 1;
}

}  // namespace fbdnn
