#include "linktopo/cli.hpp"

int main(int argc, char** argv) { return linktopo::cli::run(argc, argv); }
