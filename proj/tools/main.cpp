#include "commands.hpp"

int main(int argc, char** argv) { return rpgo::cli::run_cli(argc, argv); }
