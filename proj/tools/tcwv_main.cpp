#include <string>
#include <vector>

#include "tcwv/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return tcwv::run_cli(args);
}
