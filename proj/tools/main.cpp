#include "volnet/cli.hpp"

int main(int argc, char** argv) { return volnet::cli::run(argc, argv); }
