#include "commands.hpp"

int main(int argc, char** argv) { return atomchip::cli::run_cli(argc, argv); }
