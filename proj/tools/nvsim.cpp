#include <iostream>

#include "nvsim/cli.hpp"

int main(int argc, char** argv) {
  return nvsim::cli_dispatch(argc, argv, std::cout, std::cerr);
}
