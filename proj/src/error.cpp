#include "maskseg/error.hpp"

namespace maskseg {

int exit_code_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::usage:
      return 1;
    case ErrorKind::io:
    case ErrorKind::format:
    case ErrorKind::parse:
      return 2;
    case ErrorKind::network:
    case ErrorKind::timeout:
      return 3;
    case ErrorKind::validation:
    case ErrorKind::bounds:
      return 4;
  }
  return 4;
}

}  // namespace maskseg
