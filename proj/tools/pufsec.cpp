#include <iostream>

#include "pufsec/cli.hpp"

int main(int argc, char** argv) { return pufsec::cli::run_cli(argc, argv, std::cout, std::cerr); }
