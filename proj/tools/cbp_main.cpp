#include "cbp/cli.hpp"

int main(int argc, char** argv) { return cbp::cli::run_main(argc, argv); }
