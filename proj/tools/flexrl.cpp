#include "flexrl/cli.hpp"

int main(int argc, char** argv) { return flexrl::cli::run(argc, argv); }
