// SPDX-License-Identifier: Apache-2.0

#include "gatefuse/cli.hpp"

int main(int argc, char** argv) { return gatefuse::cli::run(argc, argv); }
