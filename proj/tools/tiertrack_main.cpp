#include "tiertrack/cli.hpp"

int main(int argc, char** argv) { return tiertrack::dispatch(argc, argv); }
