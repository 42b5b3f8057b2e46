#include "cli.hpp"

int main(int argc, char** argv) { return pvfx::cli::run(argc, argv); }
