#include <iostream>

#include "chunkchain/cli.hpp"

int main(int argc, char **argv) { return chunkchain::cli::run(argc, argv, std::cout, std::cerr); }
