#include <iostream>

#include "cngp/cli/commands.hpp"

int main(int argc, char **argv) { return cngp::cli::run_cli(argc, argv, std::cout, std::cerr); }
