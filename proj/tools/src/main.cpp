#include <iostream>
#include <string>
#include <vector>

#include "exattn_tools/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return exattn::cli::run(args, std::cout, std::cerr);
}
