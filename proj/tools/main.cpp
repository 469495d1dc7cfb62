#include "docadv/cli.hpp"

int main(int argc, char** argv) { return docadv::run_cli(argc, argv); }
