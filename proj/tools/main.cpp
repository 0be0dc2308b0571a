#include "vulngraph/cli.hpp"

int main(int argc, char** argv) { return vulngraph::cli::main(argc, argv); }
