#include <string>
#include <vector>

#include "fg/cli/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return fg::cli::run(args);
}
