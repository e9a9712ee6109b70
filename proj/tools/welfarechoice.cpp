#include "welfarechoice/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return welfarechoice::run_cli(args, std::cout, std::cerr);
}
