#include <iostream>

#include "pcrowd/cli.hpp"

int main(int argc, char** argv) {
  return pcrowd::run_cli(argc, argv, std::cout, std::cerr);
}
