#include <iostream>

#include "normlab/cli.hpp"

int main(int argc, char** argv)
{
    return normlab::cli::dispatch(argc, argv, std::cout, std::cerr);
}
