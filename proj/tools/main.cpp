#include <iostream>

#include "tmc/cli.hpp"

int main(int argc, char** argv) { return tmc::cli_main(argc, argv, std::cout, std::cerr); }
