#include <iostream>
#include <string>
#include <vector>

#include "hhmm/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return hhmm::cli::run(args, std::cout, std::cerr);
}
