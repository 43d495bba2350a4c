#include "rabikit/cli.hpp"

int main(int argc, char** argv) { return rabikit::cli_dispatch(argc, argv); }
