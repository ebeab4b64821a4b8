#include "edgeslice/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return edgeslice::run_cli(argc, argv, std::cout, std::cerr); }
