#include "treenhance/cli.hpp"

int main(int argc, char** argv) { return trenh::run_cli(argc, argv); }
