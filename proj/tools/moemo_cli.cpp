#include <iostream>

#include "moemo/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return moemo::run_cli(args, std::cout, std::cerr);
}
