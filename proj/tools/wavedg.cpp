#include "wavedg/cli.hpp"

int main(int argc, char** argv) { return wavedg::cli::main(argc, argv); }
