#include "mobgen_cli/commands.hpp"

int main(int argc, char** argv) { return mobgen::cli::run_cli(argc, argv); }
