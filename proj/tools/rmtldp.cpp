#include <iostream>

#include "rmtldp/cli.hpp"

int main(int argc, char** argv) { return rmtldp::cli::run(argc, argv, std::cout, std::cerr); }
