#include "cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return adaflow::cli::run(argc, argv, std::cout, std::cerr); }
