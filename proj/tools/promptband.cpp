#include "promptband/cli/app.hpp"

#include <iostream>

int main(int argc, char** argv) { return promptband::run_cli(argc, argv, std::cout, std::cerr); }
