#include <iostream>
#include <string>
#include <vector>

#include "pon/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return pon::cli::main(args, std::cout, std::cerr);
}
