#include <iostream>

#include "xaiaug_cli/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return xaiaug::cli::run_cli(args, std::cout, std::cerr);
}
