#include "xdom/cli/cli.hpp"

int main(int argc, char** argv) { return xdom::cli::cli_main(argc, argv); }
