#include <iostream>
#include <string>
#include <vector>

#include "peerloss/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return peerloss::dispatch(args, std::cout, std::cerr);
}
