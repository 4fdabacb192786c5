// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "hiba/cli.hpp"

int main(int argc, char** argv) { return hiba::cli::main(argc, argv, std::cout, std::cerr); }
