#include <iostream>

#include "fracmap/cli.hpp"

int main(int argc, char** argv) { return fracmap::cli::run(argc, argv, std::cout, std::cerr); }
