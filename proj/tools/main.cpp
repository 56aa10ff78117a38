#include "cli.hpp"

int main(int argc, char** argv) { return boundtail::cli::run(argc, argv); }
