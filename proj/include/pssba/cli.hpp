#pragma once

namespace pssba {

// Entry point of the command-line tool. Exit codes: 0 success, 1 usage
// error, 2 data error, 3 pipeline finished without converging (partial
// outputs are still written).
int run_cli(int argc, char** argv);

}  // namespace pssba
