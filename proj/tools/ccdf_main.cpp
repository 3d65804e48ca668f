#include "ccdf/cli.hpp"

int main(int argc, char** argv) { return ccdf::cli::main(argc, argv); }
