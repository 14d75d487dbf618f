#include "drps/cli.hpp"

int main(int argc, char** argv) { return drps::cli(argc, argv); }
