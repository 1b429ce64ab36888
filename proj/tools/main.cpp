#include <string>
#include <vector>

#include "pime/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return pime::run_cli(args);
}
