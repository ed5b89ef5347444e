#include "vrec/cli.hpp"

int main(int argc, char** argv) { return vrec::run_cli(argc, argv); }
