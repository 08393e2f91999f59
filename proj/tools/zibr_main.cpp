#include "zibr/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return zibr::cli::run(argc, argv, std::cout, std::cerr); }
