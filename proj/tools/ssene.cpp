#include "ssene/cli.hpp"

int main(int argc, char** argv) { return ssene::cli::run_cli(argc, argv); }
