#include "fedtox/error.hpp"

namespace fedtox {

int exit_code_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Config:
      return 2;
    case ErrorKind::Data:
      return 3;
    case ErrorKind::Endpoint:
      return 4;
  }
  return 1;
}

}  // namespace fedtox
