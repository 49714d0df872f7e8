#include "sysid/cli.hpp"

int main(int argc, char** argv) { return sysid::cli_main(argc, argv); }
