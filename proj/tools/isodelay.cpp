#include <iostream>

#include "isodelay/cli.hpp"

int main(int argc, char** argv) { return isodelay::run_cli(argc, argv, std::cout, std::cerr); }
