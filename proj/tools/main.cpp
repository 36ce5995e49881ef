#include "gridpool/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return gridpool::run_cli(argc, argv, std::cout, std::cerr); }
