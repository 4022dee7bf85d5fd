#include <iostream>

#include "hdkit/cli.hpp"

int main(int argc, char** argv) { return hdkit::cli::run(argc, argv, std::cout, std::cerr); }
