#include <iostream>
#include <string>
#include <vector>

#include "vinispec/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return vinispec::cli::execute(args, std::cout, std::cerr);
}
