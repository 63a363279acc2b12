#include <iostream>
#include <string>
#include <vector>

#include "qsd/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return qsd::cli::main(args, std::cout, std::cerr);
}
