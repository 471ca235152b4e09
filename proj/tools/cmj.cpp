#include <iostream>

#include "cmj/cli.hpp"

int main(int argc, char** argv) { return cmj::cli_main(argc, argv, std::cout, std::cerr); }
