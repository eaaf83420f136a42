#include <iostream>

#include "tisim/cli.hpp"

int main(int argc, char** argv) {
    return tisim::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
