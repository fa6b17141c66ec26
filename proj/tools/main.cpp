#include <vector>

#include "levyexit/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return levyexit::run_cli(std::move(args));
}
