#include "hetfuse/cli.hpp"

int main(int argc, char** argv) { return hetfuse::cli::run_cli(argc, argv); }
