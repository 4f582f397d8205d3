#include <iostream>

#include "fluxlattice/cli/app.hpp"

int main(int argc, char** argv)
{
    return fluxlattice::cli::run_cli(argc, argv, std::cout, std::cerr);
}
