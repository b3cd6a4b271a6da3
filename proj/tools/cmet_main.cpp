#include "cmet/cli.hpp"

int main(int argc, char** argv) { return cmet::dispatch(argc, argv); }
