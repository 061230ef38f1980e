#include <string>
#include <vector>

#include "arr/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return arr::run_cli(args);
}
