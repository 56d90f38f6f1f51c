#include <iostream>

#include "ganblend/cli.hpp"

int main(int argc, char** argv) {
  return ganblend::cli::run(argc, argv, std::cout, std::cerr);
}
