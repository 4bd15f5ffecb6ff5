#include <iostream>

#include "cftc/cli.hpp"

int main(int argc, char** argv) {
  return cftc::run_cli(argc, argv, std::cout, std::cerr);
}
