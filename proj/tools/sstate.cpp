#include "sstate/cli/commands.hpp"

int main(int argc, char** argv) { return sstate::cli::run(argc, argv); }
