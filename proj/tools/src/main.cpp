#include <iostream>
#include <string>
#include <vector>

#include "sfnn_cli/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return sfnn::cli::run(args, std::cout, std::cerr);
}
