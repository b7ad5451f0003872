#include "siegel/cli.hpp"

int main(int argc, char** argv) { return siegel::cli::cli_main(argc, argv); }
