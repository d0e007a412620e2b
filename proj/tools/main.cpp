#include "vmionet/cli.hpp"

int main(int argc, char** argv) { return vmionet::cli::cli_dispatch(argc, argv); }
