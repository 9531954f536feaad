#include <iostream>
#include <string>
#include <vector>

#include "levytrace/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return levytrace::run_cli(args, std::cout, std::cerr);
}
