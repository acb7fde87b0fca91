#include "cli.hpp"

int main(int argc, char** argv) { return kfdr::cli::run(argc, argv); }
