#include "mmwave/harness.hpp"

int main(int argc, char** argv) { return mmwave::run_cli(argc, argv); }
