#include <iostream>

#include "qce_cli/cli.hpp"

int main(int argc, char** argv) { return qce::cli::run(argc, argv, std::cout, std::cerr); }
