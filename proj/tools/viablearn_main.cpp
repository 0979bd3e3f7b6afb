#include "viablearn/cli.hpp"

int main(int argc, char** argv) { return viablearn::cli::main(argc, argv); }
