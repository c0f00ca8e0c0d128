#include "ddpb/cli.hpp"

int main(int argc, char** argv) { return ddpb::run_cli(argc, argv); }
