#include <iostream>
#include <string>
#include <vector>

#include "gu/cli.hpp"

int main(int argc, char** argv) {
  return gu::parse_and_dispatch(std::vector<std::string>(argv, argv + argc), std::cout,
                                std::cerr);
}
