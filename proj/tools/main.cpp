#include "seqcap/cli.hpp"

int main(int argc, char** argv) { return seqcap::run(argc, argv); }
