#include "nerf_i2i/cli.hpp"

int main(int argc, char** argv) { return nerf_i2i::run_cli(argc, argv); }
