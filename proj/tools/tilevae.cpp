#include <iostream>

#include "tilevae/cli.hpp"

int main(int argc, char** argv) { return tilevae::run_cli(argc, argv, std::cout, std::cerr); }
