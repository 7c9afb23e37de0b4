#include <iostream>

#include "hsk/cli.hpp"

int main(int argc, char** argv)
{
    return hsk::cli::run(argc, argv, std::cout, std::cerr);
}
