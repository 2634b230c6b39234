#include <iostream>

#include "volest/cli.hpp"

int main(int argc, char** argv) { return volest::run_cli(argc, argv, std::cout, std::cerr); }
