#include <string>
#include <vector>

#include "maskseg/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return maskseg::cli::dispatch(args);
}
