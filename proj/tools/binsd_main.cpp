#include "binsd/cli.hpp"

int main(int argc, char** argv) { return binsd::run_command(argc, argv); }
