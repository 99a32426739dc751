#include <iostream>

#include "fexkit/cli.hpp"

int main(int argc, char** argv) { return fexkit::run_cli(argc, argv, std::cout, std::cerr); }
