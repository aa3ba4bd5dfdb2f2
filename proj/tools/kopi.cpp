#include "kopi/cli.hpp"

int main(int argc, char** argv) {
    return kopi::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
