#include "pairkit/cli.hpp"

int main(int argc, char** argv) { return pairkit::cli::run(argc, argv); }
