#include "sympmor/cli.hpp"

int main(int argc, char** argv) { return sympmor::cli::main(argc, argv); }
