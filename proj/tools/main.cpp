#include "endogroup/cli_io.hpp"

int main(int argc, char** argv) { return endogroup::run_cli(argc, argv); }
