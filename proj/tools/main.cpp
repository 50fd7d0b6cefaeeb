#include "cli_commands.hpp"

int main(int argc, char** argv) { return real_schmidt::cli::run(argc, argv); }
