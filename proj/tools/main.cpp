#include "pssba/cli.hpp"

int main(int argc, char** argv)
{
    return pssba::run_cli(argc, argv);
}
