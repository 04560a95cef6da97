#include "mfg/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return mfg::run_cli(argc, argv, std::cout, std::cerr); }
