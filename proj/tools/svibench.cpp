#include "svi/bench.hpp"

int main(int argc, char** argv) { return svi::cli_main(argc, argv); }
