#include "replay/cli.hpp"

int main(int argc, char** argv)
{
    return replay::cli_main(argc, argv);
}
