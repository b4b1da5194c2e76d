#include <iostream>

#include "lpcore/cli.hpp"

int main(int argc, char** argv) { return lpcore::RunCli(argc, argv, std::cout, std::cerr); }
