#include "xtrack/cli.hpp"

int main(int argc, char** argv) { return xtrack::cli_main(argc, argv); }
