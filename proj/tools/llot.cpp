#include "llot/cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    return llot::cli::run(argc, argv, std::cout, std::cerr);
}
