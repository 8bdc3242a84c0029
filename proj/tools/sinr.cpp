#include "sinr/cli.hpp"

int main(int argc, char** argv) { return sinr::run_cli(argc, argv); }
