// Copyright 2026 The TiAVox Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "tiavox/cli.hpp"

int main(int argc, char** argv) { return tiavox::cli_dispatch(argc, argv, std::cout, std::cerr); }
