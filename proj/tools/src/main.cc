// Copyright 2026 The rankserve Authors.
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "commands.h"

int main(int argc, char** argv) {
  return rankserve::tools::run_cli({argv + 1, argv + argc}, std::cout, std::cerr);
}
