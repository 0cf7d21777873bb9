#include "commands.hpp"

int main(int argc, char** argv) { return ctxrr::cli::run(argc, argv); }
