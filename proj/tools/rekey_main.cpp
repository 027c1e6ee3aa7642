#include "rekey/cli.hpp"

int main(int argc, char** argv) { return rekey::cli::run_cli(argc, argv); }
