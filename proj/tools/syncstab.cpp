#include "cli.hpp"

int main(int argc, char** argv) { return syncstab::cli::main(argc, argv); }
