// Copyright 2026 The ifasnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <iostream>
#include <string>
#include <vector>

#include "cli.h"

int main(int argc, char **argv) {
  return ifasnet::cli::RunCli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
