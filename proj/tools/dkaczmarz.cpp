#include <iostream>

#include "dkaczmarz/cli.hpp"

int main(int argc, char** argv) { return dkaczmarz::run_cli(argc, argv, std::cout, std::cerr); }
