#include <iostream>

#include "peeg/cli.hpp"

int main(int argc, char** argv) {
  return peeg::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
