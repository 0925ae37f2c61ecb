#include <iostream>

#include "firelite_cli/cli.hpp"

int main(int argc, char** argv) { return firelite::cli::run(argc, argv, std::cout, std::cerr); }
