#include "csgraph/cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    return csgraph::cli::main_entry(argc, argv, std::cout, std::cerr);
}
