#include "marn/cli.hpp"

int main(int argc, char** argv) { return marn::cli::dispatch(argc, argv); }
