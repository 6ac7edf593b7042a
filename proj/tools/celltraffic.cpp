#include "celltraffic/cli.hpp"

int main(int argc, char** argv) { return celltraffic::cli::run_cli(argc, argv); }
