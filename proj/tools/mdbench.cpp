#include "mdbench/cli.hpp"

#include <csignal>
#include <cstdlib>
#include <iostream>

namespace {

// A second signal exits at once.
extern "C" void on_interrupt(int) {
    if (mdbench::cli::interrupt_flag().exchange(true)) std::_Exit(130);
}

}  // namespace

int main(int argc, char** argv) {
    std::signal(SIGINT, on_interrupt);
    std::signal(SIGTERM, on_interrupt);
    std::signal(SIGPIPE, SIG_IGN);
    std::ios::sync_with_stdio(false);
    return mdbench::cli::run({argv + 1, argv + argc}, std::cin, std::cout, std::cerr);
}
