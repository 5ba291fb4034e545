#include <string>
#include <vector>

#include "iconsim/cli.hpp"

int main(int argc, char** argv) {
    return iconsim::cli::run(std::vector<std::string>(argv, argv + argc));
}
