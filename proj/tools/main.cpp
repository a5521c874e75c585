#include "cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return reentry::cli::run_cli(args, reentry::cli::process_environment());
}
