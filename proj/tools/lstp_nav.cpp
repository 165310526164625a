#include <iostream>

#include "lstp/cli.hpp"

int main(int argc, char** argv) { return lstp::cli::run(argc, argv, std::cout, std::cerr); }
