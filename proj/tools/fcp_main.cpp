#include "fcp/cli.hpp"

int main(int argc, char** argv) { return fcp::cli::run(argc, argv); }
