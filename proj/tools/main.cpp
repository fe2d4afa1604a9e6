#include "fairtab/cli.hpp"

int main(int argc, char** argv) { return fairtab::run_cli(argc, argv); }
