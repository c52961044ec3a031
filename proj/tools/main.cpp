#include <iostream>

#include "roughlab_tools/cli.hpp"

int main(int argc, char** argv) { return roughlab::cli::main(argc, argv, std::cout, std::cerr); }
