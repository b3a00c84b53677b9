#include "sila/cli.hpp"

int main(int argc, char** argv) { return sila::cli_dispatch(argc, argv); }
