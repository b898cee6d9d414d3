#include <iostream>

#include "strobevib/cli.hpp"

int main(int argc, char** argv) { return strobevib::run_cli(argc, argv, std::cout, std::cerr); }
