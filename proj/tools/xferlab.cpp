#include "xferlab/cli.hpp"

int main(int argc, char** argv) { return xferlab::cli::run(argc, argv); }
