#include <iostream>

#include "sqiv/cli.hpp"

int main(int argc, char** argv) { return sqiv::run_cli(argc, argv, std::cout, std::cerr); }
