#include "mixbps/cli.hpp"

int main(int argc, char** argv) { return mixbps::run_cli(argc, argv); }
