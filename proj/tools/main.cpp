#include <iostream>

#include "jmrp/cli.hpp"

int main(int argc, char** argv) { return jmrp::cli::run(argc, argv, std::cout, std::cerr); }
