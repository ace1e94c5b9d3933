#include <iostream>
#include <string>
#include <vector>

#include "corpusforge/cli.hpp"

int main(int argc, char** argv) {
  return corpusforge::cli_run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
