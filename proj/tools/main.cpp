#include <string>
#include <vector>

#include "crowdloc/cli.hpp"

int main(int argc, char** argv) {
    return crowdloc::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
