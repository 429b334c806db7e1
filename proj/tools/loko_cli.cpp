#include "loko/cli.hpp"

int main(int argc, char** argv) { return loko::cli::run(argc, argv); }
