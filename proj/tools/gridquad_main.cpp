#include "gridquad/cli.hpp"

int main(int argc, char** argv) { return gridquad::cli::run(argc, argv); }
