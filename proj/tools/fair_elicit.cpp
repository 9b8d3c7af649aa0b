#include <iostream>

#include "fairelicit/cli.hpp"

int main(int argc, char** argv) {
  return fairelicit::run_cli({argv + 1, argv + argc}, {std::cin, std::cout, std::cerr});
}
