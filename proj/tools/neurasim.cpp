#include <iostream>

#include "cli/neurasim.hpp"

int main(int argc, char** argv) { return neura::cli::main(argc, argv, std::cout, std::cerr); }
