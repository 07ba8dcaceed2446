#include <iostream>

#include "procbench/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return procbench::run_cli(args, std::cout, std::cerr);
}
