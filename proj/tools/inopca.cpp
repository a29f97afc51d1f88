#include "inopca/cli.hpp"

int main(int argc, char** argv) { return inopca::cli::dispatch(argc, argv); }
