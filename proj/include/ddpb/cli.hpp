#pragma once

#include <exception>

namespace ddpb {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 1,
  kExitData = 2,
  kExitNumeric = 3,
};

/// Maps an in-flight exception to its exit category.
int exit_code_for(const std::exception& e);

/// Entry point of the ddpb command-line tool.
int run_cli(int argc, char** argv);

}  // namespace ddpb
