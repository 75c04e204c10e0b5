#include <iostream>

#include "anatomia/cli/commands.hpp"

int main(int argc, char** argv) { return anatomia::cli::run(argc, argv, std::cout, std::cerr); }
