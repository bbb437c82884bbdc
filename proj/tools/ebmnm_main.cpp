#include "ebmnm/cli.hpp"

int main(int argc, char** argv) { return ebmnm::cli::main(argc, argv); }
