#include "beliefcast/cli.hpp"

int main(int argc, char** argv) { return beliefcast::dispatch(argc, argv); }
