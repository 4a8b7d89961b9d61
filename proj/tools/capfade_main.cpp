#include <iostream>

#include "capfade/cli/app.hpp"

int main(int argc, char** argv) {
    return capfade::cli::run(argc, argv, std::cout, std::cerr);
}
