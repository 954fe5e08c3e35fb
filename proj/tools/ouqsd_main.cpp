#include <string>
#include <vector>

#include "ouqsd/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ouqsd::cli::run_command(args);
}
