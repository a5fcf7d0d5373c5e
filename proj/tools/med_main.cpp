#include <iostream>

#include "med/cli.hpp"

int main(int argc, char** argv) { return med::cli::main(argc, argv, std::cout, std::cerr); }
