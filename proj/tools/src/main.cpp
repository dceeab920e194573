#include "mpmorph_cli/cli.hpp"

int main(int argc, char** argv) { return mpmorph::cli::run(argc, argv); }
