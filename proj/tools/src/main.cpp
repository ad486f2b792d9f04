#include <iostream>

#include "vipcop/cli/commands.hpp"

int main(int argc, char** argv) {
  return vipcop::cli::run_cli(argc, argv, std::cout, std::cerr);
}
