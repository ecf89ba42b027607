#include "taxokit/cli.hpp"

int main(int argc, char** argv) { return taxokit::cli::run_cli(argc, argv); }
