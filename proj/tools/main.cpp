#include <iostream>

#include "intentloop/cli.hpp"

int main(int argc, char** argv) { return intentloop::run_cli(argc, argv, std::cout, std::cerr); }
