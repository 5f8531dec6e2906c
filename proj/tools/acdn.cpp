#include "acdn/cli.hpp"

int main(int argc, char** argv) { return acdn::cli::main(argc, argv); }
