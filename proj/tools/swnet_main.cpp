#include "swnet/cli.hpp"

int main(int argc, char** argv) { return swnet::cli::run(argc, argv); }
