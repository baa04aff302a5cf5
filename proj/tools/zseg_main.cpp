#include <iostream>
#include <string>
#include <vector>

#include "zseg/cli.hpp"

int main(int argc, char** argv) {
  return zseg::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
