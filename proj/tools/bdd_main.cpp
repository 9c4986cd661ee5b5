#include <iostream>
#include <string>
#include <vector>

#include "bdd/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return bdd::cli::cli_main(std::move(args), std::cout, std::cerr);
}
