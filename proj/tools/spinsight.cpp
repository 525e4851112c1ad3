#include "spinsight/cli.hpp"

int main(int argc, char** argv) { return spinsight::run_cli(argc, argv); }
